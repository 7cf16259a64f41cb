volatile unsigned int c = 0;
int a[2][4][4];
unsigned short b[4];
int main(void) {
  int i, j, k;
  for (i = 0; i < 2; i++)
    for (j = 0; j < 4; j++)
      for (k = 0; k < 4; k++)
        c = a[i][j][k];
  for (i = 0; i < 4; i++)
    c = b[i];
  return 0;
}
