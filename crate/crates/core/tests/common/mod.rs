//! Seeded generator of safe mini-C programs and well-formed metas.
//!
//! Programs never fault: indexes are constants, loop counters or
//! `((e % N) + N) % N`; pointers always hold addresses of live globals or of
//! the current frame's memory locals; division is by non-zero constants;
//! loops are counted; calls go to higher-numbered functions only.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use metaspec_core::minic::{parse_program, typecheck, walk_stmts, Program};
use metaspec_core::normalize::{normalize_program, NormalizedProgram};
use metaspec_core::spec::{parse_meta_file, MetaProperty};

pub const MAX_FUNCTIONS: usize = 5;
pub const MAX_STATEMENTS: usize = 30;
pub const MAX_RECORDS: usize = 3;

pub struct Generated {
    pub source: String,
    pub spec: String,
}

impl Generated {
    pub fn program(&self) -> Program {
        parse_program(&self.source).unwrap_or_else(|e| panic!("{e}\n{}", self.source))
    }

    pub fn normalized(&self) -> NormalizedProgram {
        let tp = typecheck(&self.program()).unwrap_or_else(|e| panic!("{e:?}\n{}", self.source));
        normalize_program(&tp)
    }

    pub fn metas(&self) -> Vec<MetaProperty> {
        parse_meta_file(&self.spec).unwrap_or_else(|e| panic!("{e}\n{}", self.spec))
    }
}

pub fn statement_count(p: &Program) -> usize {
    let mut n = 0;
    for f in &p.functions {
        walk_stmts(&f.body, &mut |_| n += 1);
    }
    n
}

#[derive(Clone)]
struct Record {
    name: String,
    ints: Vec<String>,
    chars: Vec<String>,
    array: Option<String>,
    /// Field of the previous record type.
    nested: Option<(String, usize)>,
}

#[derive(Clone, Copy, PartialEq)]
enum Param {
    Int,
    Rec(usize),
    IntPtr,
}

struct Func {
    name: String,
    params: Vec<Param>,
    returns_int: bool,
}

struct Scope {
    /// Index into `funcs`; `None` in main.
    func: Option<usize>,
    ints: Vec<String>,
    recs: Vec<(String, usize)>,
    int_ptrs: Vec<String>,
    /// Memory local whose address may be taken.
    mem: Option<String>,
    /// Counters of enclosing loops (readable, never written).
    counters: Vec<String>,
    free_counters: Vec<String>,
}

pub struct Gen {
    rng: ChaCha8Rng,
    n: i64,
    records: Vec<Record>,
    funcs: Vec<Func>,
}

pub fn generate(seed: u64) -> Generated {
    let mut g = Gen::new(seed);
    let source = g.program();
    let spec = g.metas();
    Generated { source, spec }
}

impl Gen {
    fn new(seed: u64) -> Self {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            n: 0,
            records: Vec::new(),
            funcs: Vec::new(),
        }
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn pick<'a, T>(&mut self, xs: &'a [T]) -> &'a T {
        xs.choose(&mut self.rng).expect("non-empty choice")
    }

    fn small(&mut self) -> i64 {
        self.rng.gen_range(-3..=9)
    }

    fn program(&mut self) -> String {
        self.n = self.rng.gen_range(2..=4);
        let nrec = self.rng.gen_range(1..=MAX_RECORDS);
        for i in 0..nrec {
            let ints: Vec<String> = (0..self.rng.gen_range(1..=2))
                .map(|k| format!("a{k}"))
                .collect();
            let chars: Vec<String> = (0..self.rng.gen_range(0..=1))
                .map(|k| format!("c{k}"))
                .collect();
            let array = self.chance(0.5).then(|| "v".to_string());
            let nested = (i > 0 && self.chance(0.4)).then(|| ("s".to_string(), i - 1));
            self.records.push(Record {
                name: format!("R{i}"),
                ints,
                chars,
                array,
                nested,
            });
        }
        let nfun = self.rng.gen_range(1..=MAX_FUNCTIONS);
        for i in 1..nfun {
            let mut params = Vec::new();
            for _ in 0..self.rng.gen_range(0..=3) {
                params.push(match self.rng.gen_range(0..3) {
                    0 => Param::Int,
                    1 => Param::Rec(self.rng.gen_range(0..nrec)),
                    _ => Param::IntPtr,
                });
            }
            let returns_int = self.chance(0.6);
            self.funcs.push(Func {
                name: format!("f{i}"),
                params,
                returns_int,
            });
        }

        let mut out = format!("const int N = {};\n", self.n);
        for r in &self.records {
            out += &format!("struct {} {{\n", r.name);
            for f in &r.ints {
                out += &format!("    int {f};\n");
            }
            for f in &r.chars {
                out += &format!("    char {f};\n");
            }
            if let Some(a) = &r.array {
                out += &format!("    int {a}[N];\n");
            }
            if let Some((f, k)) = &r.nested {
                out += &format!("    struct R{k} {f};\n");
            }
            out += "};\n";
        }
        out += "int g0;\nint g1;\nint g2;\nchar gc;\nint ga[N];\nchar gb[N];\nint* ip;\nchar* cp;\nint* base;\n";
        for i in 0..nrec {
            out += &format!("struct R{i} r{i}[N];\nstruct R{i}* p{i};\n");
        }

        // Main's pointer set-up and final return come out of the same budget;
        // every body gets at least two statements.
        let fixed = 3 + nrec + 1;
        let total = self
            .rng
            .gen_range((fixed + 2 * nfun).max(8)..=MAX_STATEMENTS);
        let mut shares = vec![2; nfun];
        for _ in 0..total - fixed - 2 * nfun {
            // Main (slot 0) is weighted double.
            let slot = self.rng.gen_range(0..=nfun).saturating_sub(1);
            shares[slot] += 1;
        }
        let mut bodies = Vec::new();
        for (i, share) in shares[1..].iter().enumerate() {
            bodies.push(self.function(i, *share));
        }
        for (f, body) in self.funcs.iter().zip(&bodies) {
            let params: Vec<String> = f
                .params
                .iter()
                .enumerate()
                .map(|(k, p)| match p {
                    Param::Int => format!("int x{k}"),
                    Param::Rec(r) => format!("struct R{r}* q{k}"),
                    Param::IntPtr => format!("int* w{k}"),
                })
                .collect();
            let ret = if f.returns_int { "int" } else { "void" };
            out += &format!("{ret} {}({}) {{\n{body}}}\n", f.name, params.join(", "));
        }
        let mut main = String::from("    base = &ga[0];\n    ip = &g1;\n    cp = &gb[0];\n");
        for i in 0..nrec {
            let k = self.rng.gen_range(0..self.n);
            main += &format!("    p{i} = &r{i}[{k}];\n");
        }
        main += &self.body(Scope::new(None), shares[0]);
        out += &format!("int main() {{\n{main}    return 0;\n}}\n");
        out
    }

    fn function(&mut self, idx: usize, budget: usize) -> String {
        let f = &self.funcs[idx];
        let mut sc = Scope::new(Some(idx));
        for (k, p) in f.params.iter().enumerate() {
            match p {
                Param::Int => sc.ints.push(format!("x{k}")),
                Param::Rec(r) => sc.recs.push((format!("q{k}"), *r)),
                Param::IntPtr => sc.int_ptrs.push(format!("w{k}")),
            }
        }
        if f.returns_int {
            return self.body(sc, budget - 1) + "    return t;\n";
        }
        if self.chance(0.3) {
            return self.body(sc, budget - 1) + "    return;\n";
        }
        self.body(sc, budget)
    }

    /// Declarations followed by statements: `budget` in all, at least one.
    fn body(&mut self, mut sc: Scope, budget: usize) -> String {
        let mut decls = String::from("    int t;\n");
        let mut budget = budget.saturating_sub(1);
        sc.ints.push("t".into());
        if budget > 4 && self.chance(0.4) {
            decls += "    int m;\n";
            sc.mem = Some("m".into());
            budget -= 1;
        }
        if budget > 6 && self.chance(0.6) {
            decls += "    int i0;\n";
            sc.free_counters.push("i0".into());
            budget -= 1;
            if budget > 8 && self.chance(0.3) {
                decls += "    int i1;\n";
                sc.free_counters.push("i1".into());
                budget -= 1;
            }
        }
        let mut out = decls;
        let mut left = budget;
        while left > 0 {
            out += &self.stmt(&mut sc, &mut left, 1);
        }
        out
    }

    fn stmt(&mut self, sc: &mut Scope, left: &mut usize, depth: usize) -> String {
        let pad = "    ".repeat(depth);
        *left -= 1;
        let roll = self.rng.gen_range(0..100);
        if roll < 15 && *left >= 2 && depth < 3 {
            let c = self.cond(sc);
            let mut then = String::new();
            let mut n = self.rng.gen_range(1..=(*left).min(3));
            *left -= n;
            while n > 0 {
                then += &self.stmt(sc, &mut n, depth + 1);
            }
            let mut els = String::new();
            if *left >= 1 && self.chance(0.5) {
                let mut n = self.rng.gen_range(1..=(*left).min(2));
                *left -= n;
                while n > 0 {
                    els += &self.stmt(sc, &mut n, depth + 1);
                }
            }
            return if els.is_empty() {
                format!("{pad}if ({c}) {{\n{then}{pad}}}\n")
            } else {
                format!("{pad}if ({c}) {{\n{then}{pad}}} else {{\n{els}{pad}}}\n")
            };
        }
        if roll < 27 && *left >= 3 && depth < 3 && !sc.free_counters.is_empty() {
            let i = sc.free_counters.remove(0);
            *left -= 2;
            let mut n = self.rng.gen_range(1..=(*left).min(3));
            *left -= n;
            sc.counters.push(i.clone());
            let mut body = String::new();
            while n > 0 {
                body += &self.stmt(sc, &mut n, depth + 1);
            }
            sc.counters.pop();
            sc.free_counters.insert(0, i.clone());
            let inner = "    ".repeat(depth + 1);
            return format!(
                "{pad}{i} = 0;\n{pad}while ({i} < N) {{\n{body}{inner}{i} = {i} + 1;\n{pad}}}\n"
            );
        }
        if roll < 38 {
            if let Some(s) = self.call(sc) {
                return format!("{pad}{s}\n");
            }
        }
        if roll < 43 {
            let lo = self.rng.gen_range(-2..=3);
            let hi = lo + self.rng.gen_range(0..=4);
            let lv = self.int_lvalue(sc);
            return format!("{pad}{lv} = any_int({lo}, {hi});\n");
        }
        if roll < 52 {
            return format!("{pad}{}\n", self.pointer_assign(sc));
        }
        let lv = if self.chance(0.2) {
            self.char_lvalue(sc)
        } else {
            self.int_lvalue(sc)
        };
        let e = self.expr(sc, 2);
        format!("{pad}{lv} = {e};\n")
    }

    fn call(&mut self, sc: &Scope) -> Option<String> {
        let callees: Vec<usize> = (0..self.funcs.len())
            .filter(|&j| sc.func.is_none_or(|i| j > i))
            .collect();
        if callees.is_empty() {
            return None;
        }
        let j = *self.pick(&callees);
        let params = self.funcs[j].params.clone();
        let args: Vec<String> = params
            .iter()
            .map(|p| match p {
                Param::Int => self.expr(sc, 1),
                Param::Rec(r) => self.rec_pointer(sc, *r),
                Param::IntPtr => self.int_pointer(sc),
            })
            .collect();
        let call = format!("{}({})", self.funcs[j].name, args.join(", "));
        if self.funcs[j].returns_int && self.chance(0.8) {
            let lv = self.int_lvalue(sc);
            Some(format!("{lv} = {call};"))
        } else {
            Some(format!("{call};"))
        }
    }

    fn pointer_assign(&mut self, sc: &Scope) -> String {
        let nrec = self.records.len();
        match self.rng.gen_range(0..4) {
            0 => {
                let r = self.rng.gen_range(0..nrec);
                let p = self.rec_pointer(sc, r);
                format!("p{r} = {p};")
            }
            1 if !sc.recs.is_empty() => {
                let (q, r) = self.pick(&sc.recs).clone();
                let idx = self.index(sc);
                format!("{q} = &r{r}[{idx}];")
            }
            2 => {
                let idx = self.index(sc);
                let target = if self.chance(0.5) {
                    format!("&gb[{idx}]")
                } else {
                    match self.char_field(sc) {
                        Some(f) => format!("&{f}"),
                        None => format!("&gb[{idx}]"),
                    }
                };
                format!("cp = {target};")
            }
            _ => {
                let idx = self.index(sc);
                let target = match self.rng.gen_range(0..3) {
                    0 => format!("&ga[{idx}]"),
                    1 => format!("&g{}", self.rng.gen_range(0..3)),
                    _ => match self.int_field(sc) {
                        Some(f) => format!("&{f}"),
                        None => "&g0".to_string(),
                    },
                };
                format!("ip = {target};")
            }
        }
    }

    /// Address of a record of type `r` that outlives any call.
    fn rec_pointer(&mut self, sc: &Scope, r: usize) -> String {
        let own: Vec<String> = sc
            .recs
            .iter()
            .filter(|(_, t)| *t == r)
            .map(|(q, _)| q.clone())
            .collect();
        match self.rng.gen_range(0..3) {
            0 if !own.is_empty() => self.pick(&own).clone(),
            1 => format!("p{r}"),
            _ => {
                let idx = self.index(sc);
                format!("&r{r}[{idx}]")
            }
        }
    }

    fn int_pointer(&mut self, sc: &Scope) -> String {
        match self.rng.gen_range(0..5) {
            0 if !sc.int_ptrs.is_empty() => self.pick(&sc.int_ptrs).clone(),
            1 if sc.mem.is_some() => format!("&{}", sc.mem.as_ref().unwrap()),
            2 => "ip".into(),
            3 => {
                let idx = self.index(sc);
                format!("&ga[{idx}]")
            }
            _ => format!("&g{}", self.rng.gen_range(0..3)),
        }
    }

    fn index(&mut self, sc: &Scope) -> String {
        match self.rng.gen_range(0..4) {
            0 if !sc.counters.is_empty() => self.pick(&sc.counters).clone(),
            1 => {
                let e = self.leaf(sc);
                format!("({e} % N + N) % N")
            }
            _ => self.rng.gen_range(0..self.n).to_string(),
        }
    }

    /// A record value (not a pointer) of type `r` reachable from `sc`.
    fn record(&mut self, sc: &Scope, r: usize) -> String {
        let own: Vec<String> = sc
            .recs
            .iter()
            .filter(|(_, t)| *t == r)
            .map(|(q, _)| q.clone())
            .collect();
        let base = match self.rng.gen_range(0..3) {
            0 if !own.is_empty() => format!("{}->", self.pick(&own)),
            1 => format!("p{r}->"),
            _ => {
                let idx = self.index(sc);
                format!("r{r}[{idx}].")
            }
        };
        // Descend into an embedded record now and then.
        let outer: Vec<usize> = (0..self.records.len())
            .filter(|&o| {
                self.records[o]
                    .nested
                    .as_ref()
                    .is_some_and(|(_, k)| *k == r)
            })
            .collect();
        if !outer.is_empty() && self.chance(0.25) {
            let o = *self.pick(&outer);
            let f = self.records[o].nested.clone().unwrap().0;
            let idx = self.index(sc);
            return format!("r{o}[{idx}].{f}.");
        }
        base
    }

    fn int_field(&mut self, sc: &Scope) -> Option<String> {
        let r = self.rng.gen_range(0..self.records.len());
        let rec = self.records[r].clone();
        let base = self.record(sc, r);
        if rec.array.is_some() && self.chance(0.3) {
            let idx = self.index(sc);
            return Some(format!("{base}v[{idx}]"));
        }
        Some(format!("{base}{}", self.pick(&rec.ints)))
    }

    fn char_field(&mut self, sc: &Scope) -> Option<String> {
        let with: Vec<usize> = (0..self.records.len())
            .filter(|&r| !self.records[r].chars.is_empty())
            .collect();
        if with.is_empty() {
            return None;
        }
        let r = *self.pick(&with);
        let base = self.record(sc, r);
        let f = self.pick(&self.records[r].chars.clone()).clone();
        Some(format!("{base}{f}"))
    }

    fn int_lvalue(&mut self, sc: &Scope) -> String {
        match self.rng.gen_range(0..10) {
            0 | 1 => self.pick(&sc.ints).clone(),
            2 => format!("g{}", self.rng.gen_range(0..3)),
            3 => {
                let idx = self.index(sc);
                format!("ga[{idx}]")
            }
            4 => "*ip".into(),
            5 if !sc.int_ptrs.is_empty() => format!("*{}", self.pick(&sc.int_ptrs)),
            6 if sc.mem.is_some() => sc.mem.clone().unwrap(),
            7 => {
                let idx = self.index(sc);
                format!("base[{idx}]")
            }
            _ => self.int_field(sc).unwrap(),
        }
    }

    fn char_lvalue(&mut self, sc: &Scope) -> String {
        match self.rng.gen_range(0..4) {
            0 => "gc".into(),
            1 => "*cp".into(),
            2 => {
                let idx = self.index(sc);
                format!("gb[{idx}]")
            }
            _ => self.char_field(sc).unwrap_or_else(|| "gc".into()),
        }
    }

    fn leaf(&mut self, sc: &Scope) -> String {
        match self.rng.gen_range(0..12) {
            0 | 1 => self.small().to_string(),
            2 | 3 => self.pick(&sc.ints).clone(),
            4 if !sc.counters.is_empty() => self.pick(&sc.counters).clone(),
            5 => format!("g{}", self.rng.gen_range(0..3)),
            6 => format!("ga[{}]", self.rng.gen_range(0..self.n)),
            7 => "*ip".into(),
            8 => "*cp".into(),
            9 if sc.mem.is_some() => sc.mem.clone().unwrap(),
            10 => ["gc", "N"][self.rng.gen_range(0..2)].into(),
            _ => {
                let r = self.rng.gen_range(0..self.records.len());
                let f = self.pick(&self.records[r].ints.clone()).clone();
                format!("r{r}[{}].{f}", self.rng.gen_range(0..self.n))
            }
        }
    }

    fn expr(&mut self, sc: &Scope, depth: usize) -> String {
        if depth == 0 || self.chance(0.35) {
            return match self.rng.gen_range(0..6) {
                0 => self.int_field(sc).unwrap(),
                1 if !sc.int_ptrs.is_empty() => format!("*{}", self.pick(&sc.int_ptrs)),
                _ => self.leaf(sc),
            };
        }
        let a = self.expr(sc, depth - 1);
        match self.rng.gen_range(0..10) {
            0 => format!("-({a})"),
            1 => format!("{a} * {}", self.rng.gen_range(-2..=3)),
            2 => format!("{a} / {}", self.rng.gen_range(1..=3)),
            3 => format!("{a} % {}", self.rng.gen_range(2..=5)),
            4 => {
                let b = self.expr(sc, depth - 1);
                let op = self.pick(&["<", "<=", "==", "!=", ">", ">="]).to_string();
                format!("({a} {op} {b})")
            }
            5 => {
                let b = self.expr(sc, depth - 1);
                format!("({a} && {b})")
            }
            _ => {
                let b = self.expr(sc, depth - 1);
                let op = self.pick(&["+", "-"]).to_string();
                format!("({a} {op} {b})")
            }
        }
    }

    fn cond(&mut self, sc: &Scope) -> String {
        let a = self.expr(sc, 1);
        let b = self.expr(sc, 1);
        let op = self.pick(&["<", "<=", "==", "!=", ">", ">="]).to_string();
        if self.chance(0.2) {
            let c = self.leaf(sc);
            format!("{a} {op} {b} || !{c}")
        } else {
            format!("{a} {op} {b}")
        }
    }

    fn metas(&mut self) -> String {
        let count = self.rng.gen_range(1..=3);
        let mut names: Vec<String> = self.funcs.iter().map(|f| f.name.clone()).collect();
        names.push("main".into());
        let mut out = String::from("/*@\n");
        for i in 0..count {
            let targets = match self.rng.gen_range(0..5) {
                0 => {
                    let k = self.rng.gen_range(1..=names.len());
                    let chosen: Vec<String> =
                        names.choose_multiple(&mut self.rng, k).cloned().collect();
                    format!("\\subset(f, {{{}}}) ==> ", chosen.join(", "))
                }
                1 => format!("!\\subset(f, {{{}}}) ==> ", self.pick(&names)),
                _ => String::new(),
            };
            let (ctx, pred) = match self.rng.gen_range(0..4) {
                0 => ("strong_invariant", self.state_pred()),
                1 => ("weak_invariant", self.state_pred()),
                2 => ("writing", self.access_pred("written")),
                _ => ("reading", self.access_pred("read")),
            };
            out += &format!("meta X{i}: \\forall function f; {targets}\\{ctx}(f),\n    {pred};\n");
        }
        out += "*/\n";
        out
    }

    fn cell(&mut self, quantified: bool) -> String {
        let idx = if quantified {
            "k".to_string()
        } else {
            self.rng.gen_range(0..self.n).to_string()
        };
        match self.rng.gen_range(0..8) {
            0 => format!("g{}", self.rng.gen_range(0..3)),
            1 => format!("ga[{idx}]"),
            2 => format!("gb[{idx}]"),
            3 => "gc".into(),
            4 => {
                let r = self.rng.gen_range(0..self.records.len());
                format!("p{r}->{}", self.pick(&self.records[r].ints.clone()))
            }
            5 => {
                let r = self.rng.gen_range(0..self.records.len());
                let rec = self.records[r].clone();
                match (&rec.array, &rec.nested) {
                    (Some(v), _) if self.chance(0.5) => {
                        format!("r{r}[{idx}].{v}[{}]", self.rng.gen_range(0..self.n))
                    }
                    (_, Some((s, k))) => {
                        let f = self.pick(&self.records[*k].ints.clone()).clone();
                        format!("r{r}[{idx}].{s}.{f}")
                    }
                    _ => format!("r{r}[{idx}].{}", self.pick(&self.records[r].ints.clone())),
                }
            }
            _ => {
                let r = self.rng.gen_range(0..self.records.len());
                format!("r{r}[{idx}].{}", self.pick(&self.records[r].ints.clone()))
            }
        }
    }

    fn atom(&mut self, quantified: bool) -> String {
        let c = self.cell(quantified);
        let op = self.pick(&["<", "<=", "==", "!=", ">", ">="]).to_string();
        let rhs = if self.chance(0.3) {
            self.cell(quantified)
        } else {
            self.rng.gen_range(-2..=6).to_string()
        };
        format!("{c} {op} {rhs}")
    }

    fn state_pred(&mut self) -> String {
        match self.rng.gen_range(0..4) {
            0 => {
                let a = self.atom(true);
                format!("\\forall int k; 0 <= k < N ==> {a}")
            }
            1 => {
                let g = self.atom(false);
                let a = self.atom(true);
                format!("{g} ==> \\forall int k; 0 <= k < N ==> {a}")
            }
            2 => {
                let a = self.atom(false);
                let b = self.atom(false);
                format!("{a} || {b}")
            }
            _ => self.atom(false),
        }
    }

    fn region(&mut self, quantified: bool) -> String {
        match self.rng.gen_range(0..6) {
            0 => "base + (0 .. N - 1)".into(),
            1 => "ip + (0 .. 0)".into(),
            2 => "cp + (0 .. 0)".into(),
            _ => format!("&{}", self.cell(quantified)),
        }
    }

    fn access_pred(&mut self, var: &str) -> String {
        match self.rng.gen_range(0..3) {
            0 => {
                let r = self.region(true);
                let g = self.atom(true);
                format!("\\forall int k; 0 <= k < N && {g} ==> \\separated(\\{var}, {r})")
            }
            1 => {
                let g = self.atom(false);
                let r = self.region(false);
                format!("{g} ==> \\separated(\\{var}, {r})")
            }
            _ => {
                let r = self.region(false);
                format!("\\separated(\\{var}, {r})")
            }
        }
    }
}

impl Scope {
    fn new(func: Option<usize>) -> Self {
        Scope {
            func,
            ints: Vec::new(),
            recs: Vec::new(),
            int_ptrs: Vec::new(),
            mem: None,
            counters: Vec::new(),
            free_counters: Vec::new(),
        }
    }
}
