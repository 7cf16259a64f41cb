void foo(int, int, int, int, int, int, int);
static short a = 4;
void b(int c) {
    short v1 = 0;
    int v2,  v3 = 2,  v4 = 9,  v5 = 5,
        v6 = 5, v7 = (v2 = a) == 0 & c;
    foo(v1, v2, v3, v4, v5, v6, v7);
}
int main () {
    b(a);
    a = 0;
}
