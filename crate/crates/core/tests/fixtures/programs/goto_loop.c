char a = 0;
int b = 0;
void foo(int *d) { a = 0; }
int main() {
  int *v1 = &b;
  int **v2 = &v1;
f:
  if (a) goto f;
  *v2 = v1;
  foo(*v2);
}
