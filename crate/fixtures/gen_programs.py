#!/usr/bin/env python3
"""Small seeded C program generator with a csmith-compatible command line.

Only --seed, --no-structs/--structs, --no-volatiles/--volatiles,
--max-funcs N and --max-block-depth N affect the output; other options are
accepted and ignored.
"""
import random
import sys


def parse_args(argv):
    opts = {"seed": 0, "structs": True, "volatiles": True, "max_funcs": 3, "depth": 3}
    i = 0
    while i < len(argv):
        a = argv[i]
        if a == "--seed":
            opts["seed"] = int(argv[i + 1]); i += 2; continue
        if a == "--max-funcs":
            opts["max_funcs"] = max(1, int(argv[i + 1])); i += 2; continue
        if a == "--max-block-depth":
            opts["depth"] = max(1, int(argv[i + 1])); i += 2; continue
        if a in ("--no-structs",):
            opts["structs"] = False
        elif a in ("--structs",):
            opts["structs"] = True
        elif a == "--no-volatiles":
            opts["volatiles"] = False
        elif a == "--volatiles":
            opts["volatiles"] = True
        elif i + 1 < len(argv) and not argv[i + 1].startswith("--"):
            i += 1
        i += 1
    return opts


class Gen:
    def __init__(self, opts):
        self.r = random.Random(opts["seed"])
        self.opts = opts
        self.out = []

    def emit(self, depth, text):
        self.out.append("    " * depth + text)

    def globals(self):
        r = self.r
        vol = "volatile " if self.opts["volatiles"] else ""
        self.sink = "g_sink"
        self.emit(0, f"{vol}int g_sink = 0;")
        self.emit(0, "int g_cnt = %d;" % r.randint(1, 9))
        self.emit(0, "char g_flag = 0;")
        self.d0, self.d1 = r.choice([(2, 4), (4, 2), (3, 3), (10, 2)])
        vals = ", ".join("{%s}" % ", ".join(str(r.randint(0, 50)) for _ in range(self.d1)) for _ in range(self.d0))
        self.emit(0, f"int g_arr[{self.d0}][{self.d1}] = {{{vals}}};")
        self.n1 = r.choice([4, 6, 8])
        self.emit(0, "unsigned short g_vec[%d] = {%s};" % (self.n1, ", ".join(str(r.randint(0, 9)) for _ in range(self.n1))))
        if self.opts["structs"]:
            self.emit(0, "struct S0 { int f0; short f1; };")
            self.emit(0, "static struct S0 g_s = {%d, %d};" % (r.randint(0, 9), r.randint(0, 9)))

    def value(self, locals_):
        r = self.r
        choices = [str(r.randint(0, 20))] + locals_
        a = r.choice(choices)
        b = r.choice(choices)
        op = r.choice(["+", "^", "|", "&", "-"])
        return f"(({a} {op} {b}) & 255)"

    def stmt(self, depth, locals_, budget):
        r = self.r
        kind = r.randrange(11)
        loc = r.choice(locals_)
        if kind == 0 and budget > 1:
            i, j = r.sample(self.ivars, 2)
            self.emit(depth, f"for ({i} = 0; {i} < {self.d0}; {i}++)")
            self.emit(depth + 1, f"for ({j} = 0; {j} < {self.d1}; {j}++)")
            self.emit(depth + 2, f"{self.sink} = g_arr[{i}][{j}];")
        elif kind == 1 and budget > 1:
            i, j, k = r.sample(self.ivars, 3)
            self.emit(depth, f"for ({i} = 0; {i} < {self.d0}; {i}++) {{")
            self.emit(depth + 1, f"{j} = {k} = 0;")
            self.emit(depth + 1, f"for (; {k} < 1; {k}++)")
            self.emit(depth + 2, f"{self.sink} = g_arr[{i}][({j})*{k}];")
            self.emit(depth, "}")
        elif kind == 2:
            self.emit(depth, f"{loc} = {self.value(locals_)};")
        elif kind == 3:
            a, b = r.choice(locals_), r.choice(locals_)
            self.emit(depth, f"g_cnt = {a} + {b};")
        elif kind == 4:
            self.emit(depth, f"g_cnt = {loc} & 0;")
        elif kind == 5 and budget > 1:
            self.emit(depth, f"if (g_cnt > {r.randint(0, 30)}) {{")
            self.stmt(depth + 1, locals_, budget - 1)
            self.emit(depth, "} else {")
            self.stmt(depth + 1, locals_, budget - 1)
            self.emit(depth, "}")
        elif kind == 6:
            i = r.choice(self.ivars)
            self.emit(depth, f"for ({i} = 0; {i} < {self.n1}; {i}++)")
            self.emit(depth + 1, f"{self.sink} = g_vec[{i}];")
        elif kind == 7 and self.callees:
            f = r.choice(self.callees)
            self.emit(depth, f"g_cnt = {f}({loc});")
        elif kind == 8 and self.opts["structs"]:
            self.emit(depth, f"g_s.f0 = {loc};")
        elif kind == 9:
            self.emit(depth, f"{self.sink} = {loc} * {r.randint(1, 3)};")
        else:
            self.emit(depth, f"{loc} = {loc} + 1;")

    def body(self, depth, extra):
        r = self.r
        n = r.randint(3, 5)
        names = [f"l_{self.uid + t}" for t in range(n)]
        self.uid += n
        inits = ", ".join(f"{nm} = {r.randint(0, 9)}" for nm in names)
        self.emit(depth, f"int {inits};")
        self.ivars = ["i", "j", "k"]
        self.emit(depth, "int i = 0, j = 0, k = 0;")
        if r.random() < 0.5:
            self.emit(depth, f"int *l_p = &{names[0]};")
            self.emit(depth, f"int **l_pp = &l_p;")
            self.emit(depth, f"*l_pp = l_p;")
            self.emit(depth, f"g_cnt = **l_pp;")
        locals_ = names + extra
        if r.random() < 0.3:
            self.emit(0, "lbl_%d:" % self.uid)
            self.emit(depth, f"if (g_flag)")
            self.emit(depth + 1, f"goto lbl_{self.uid};")
        for _ in range(r.randint(4, 9)):
            self.stmt(depth, locals_, self.opts["depth"])
        return names

    def function(self, name):
        self.emit(0, f"static int {name}(int p_0)")
        self.emit(0, "{")
        names = self.body(1, ["p_0"])
        self.emit(1, f"return ({names[0]} + {names[-1]} + p_0) & 1023;")
        self.emit(0, "}")

    def program(self):
        self.uid = 0
        self.emit(0, "#include <stdio.h>")
        self.globals()
        self.callees = []
        for n in range(self.r.randint(1, self.opts["max_funcs"])):
            name = f"func_{n + 1}"
            self.function(name)
            self.callees.append(name)
        self.emit(0, "int main(void)")
        self.emit(0, "{")
        names = self.body(1, [])
        for f in self.callees:
            self.emit(1, f"g_cnt = {f}({self.r.choice(names)});")
        self.emit(1, 'printf("checksum = %d\\n", g_cnt);')
        self.emit(1, "return 0;")
        self.emit(0, "}")
        return "\n".join(self.out) + "\n"


if __name__ == "__main__":
    sys.stdout.write(Gen(parse_args(sys.argv[1:])).program())
