//! Random C++ corpora with their expected symbol graph.
//!
//! The generator draws a plan (namespaces, classes with bases and members,
//! overloaded free functions, templates, forward declarations), renders it
//! to files while recording every declaration and call it writes, and then
//! resolves names with plain linear scans.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

const NAMESPACES: [&str; 4] = ["", "alpha", "beta", "alpha::inner"];
const PARAM_TYPES: [&str; 8] = [
    "int",
    "double",
    "char",
    "const std::string&",
    "long",
    "bool",
    "float*",
    "unsigned int",
];
const RET_TYPES: [&str; 4] = ["int", "void", "double", "bool"];
const METHOD_NAMES: [&str; 6] = ["run", "size", "update", "reset", "apply", "value"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefSymbol {
    pub id: u32,
    pub kind: &'static str,
    pub name: String,
    pub qualified_name: String,
    pub signature: String,
    pub path: String,
    pub start_line: u32,
    pub end_line: u32,
    pub is_definition: bool,
    pub template_params: String,
    pub is_virtual: bool,
    pub is_override: bool,
    pub bases: Vec<String>,
}

impl RefSymbol {
    pub fn scope(&self) -> &str {
        if self.name.starts_with("unresolved:") {
            return "";
        }
        self.qualified_name
            .strip_suffix(self.name.as_str())
            .and_then(|s| s.strip_suffix("::"))
            .unwrap_or("")
    }

    pub fn is_function(&self) -> bool {
        matches!(
            self.kind,
            "free_function" | "member_function" | "constructor" | "template_function"
        )
    }

    pub fn is_class_def(&self) -> bool {
        matches!(self.kind, "class" | "struct" | "template_class") && self.is_definition
    }

    pub fn is_sentinel(&self) -> bool {
        self.name.starts_with("unresolved:")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RefEdgeKind {
    Contains,
    InheritsFrom,
    Calls,
    OverloadOf,
    Overrides,
}

impl RefEdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RefEdgeKind::Contains => "contains",
            RefEdgeKind::InheritsFrom => "inherits_from",
            RefEdgeKind::Calls => "calls",
            RefEdgeKind::OverloadOf => "overload_of",
            RefEdgeKind::Overrides => "overrides",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RefEdge {
    pub kind: RefEdgeKind,
    pub from: u32,
    pub to: u32,
    /// `(line, column)` of the callee name, calls only.
    pub site: Option<(u32, u32)>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    /// `(path, content)`, sorted by path.
    pub files: Vec<(String, String)>,
    pub symbols: Vec<RefSymbol>,
    /// Sorted, no duplicates.
    pub edges: Vec<RefEdge>,
}

#[derive(Debug, Clone, Copy)]
pub struct CorpusConfig {
    pub max_files: usize,
    pub max_classes: usize,
    pub max_functions: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            max_files: 4,
            max_classes: 6,
            max_functions: 7,
        }
    }
}

// ---- plan ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MStyle {
    Inline,
    Decl,
    DeclOut,
}

#[derive(Debug, Clone)]
struct Method {
    name: String,
    ret: &'static str,
    params: Vec<&'static str>,
    is_const: bool,
    is_virtual: bool,
    is_override: bool,
    pure: bool,
    style: MStyle,
}

#[derive(Debug, Clone)]
struct Class {
    name: String,
    ns: &'static str,
    keyword: &'static str,
    template: bool,
    /// `(class index, written qualified)`.
    bases: Vec<(usize, bool)>,
    ctors: Vec<(Vec<&'static str>, bool)>,
    methods: Vec<Method>,
    fields: Vec<String>,
    dtor: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FStyle {
    Def,
    DeclDef,
    Decl,
}

#[derive(Debug, Clone)]
struct Overload {
    ret: &'static str,
    params: Vec<&'static str>,
    style: FStyle,
}

#[derive(Debug, Clone)]
struct Func {
    name: String,
    ns: &'static str,
    template: bool,
    overloads: Vec<Overload>,
}

#[derive(Debug, Clone)]
enum Entity {
    Class(usize),
    OutOfClass(usize, usize),
    FnDecl(usize, usize),
    FnDef(usize, usize),
    Forward {
        name: String,
        keyword: &'static str,
        template: bool,
        ns: &'static str,
    },
    Enum {
        name: String,
        scoped: bool,
    },
    Var {
        name: String,
        external: bool,
    },
}

struct Plan {
    classes: Vec<Class>,
    funcs: Vec<Func>,
    entities: Vec<(Entity, &'static str)>,
}

fn signature(params: &[&str], is_const: bool) -> String {
    format!("({}){}", params.join(", "), if is_const { " const" } else { "" })
}

fn qualify(scope: &str, name: &str) -> String {
    if scope.is_empty() {
        name.to_string()
    } else {
        format!("{scope}::{name}")
    }
}

fn random_params<R: Rng + ?Sized>(rng: &mut R, max: usize) -> Vec<&'static str> {
    let n = rng.gen_range(0..=max);
    (0..n).map(|_| *PARAM_TYPES.choose(rng).unwrap()).collect()
}

fn plan<R: Rng + ?Sized>(rng: &mut R, cfg: &CorpusConfig) -> Plan {
    let mut classes: Vec<Class> = Vec::new();
    let n_classes = rng.gen_range(0..=cfg.max_classes);
    for i in 0..n_classes {
        let template = rng.gen_bool(0.2);
        let name = if template { format!("T{i}") } else { format!("C{i}") };
        let mut bases = Vec::new();
        if i > 0 {
            let k = rng.gen_range(0..=i.min(2));
            let mut pool: Vec<usize> = (0..i).collect();
            pool.shuffle(rng);
            for &b in pool.iter().take(k) {
                bases.push((b, rng.gen_bool(0.5)));
            }
        }
        let mut methods: Vec<Method> = Vec::new();
        let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
        let pick_style = |rng: &mut R| -> MStyle {
            match rng.gen_range(0..3) {
                0 => MStyle::Inline,
                1 => MStyle::Decl,
                _ if template => MStyle::Inline,
                _ => MStyle::DeclOut,
            }
        };
        for &(b, _) in &bases {
            let inherited: Vec<Method> = classes[b].methods.clone();
            for bm in inherited {
                if !rng.gen_bool(0.45) {
                    continue;
                }
                let key = (bm.name.clone(), signature(&bm.params, bm.is_const));
                if !seen.insert(key) {
                    continue;
                }
                methods.push(Method {
                    name: bm.name.clone(),
                    ret: bm.ret,
                    params: bm.params.clone(),
                    is_const: bm.is_const,
                    is_virtual: rng.gen_bool(0.3),
                    is_override: (bm.is_virtual && rng.gen_bool(0.7)) || rng.gen_bool(0.1),
                    pure: false,
                    style: pick_style(rng),
                });
            }
        }
        for j in 0..rng.gen_range(0..=3) {
            let name = if rng.gen_bool(0.7) {
                METHOD_NAMES.choose(rng).unwrap().to_string()
            } else {
                format!("m{i}_{j}")
            };
            let params = random_params(rng, 2);
            let is_const = rng.gen_bool(0.25);
            if !seen.insert((name.clone(), signature(&params, is_const))) {
                continue;
            }
            let style = pick_style(rng);
            let is_virtual = rng.gen_bool(0.4);
            methods.push(Method {
                name,
                ret: RET_TYPES.choose(rng).unwrap(),
                params,
                is_const,
                is_virtual,
                is_override: rng.gen_bool(0.05),
                pure: is_virtual && style == MStyle::Decl && rng.gen_bool(0.3),
                style,
            });
        }
        let mut ctors: Vec<(Vec<&'static str>, bool)> = Vec::new();
        for _ in 0..rng.gen_range(0..=2) {
            let params = random_params(rng, 2);
            if ctors.iter().all(|(p, _)| *p != params) {
                ctors.push((params, rng.gen_bool(0.6)));
            }
        }
        let fields = (0..rng.gen_range(0..=2)).map(|j| format!("fld{i}_{j}")).collect();
        classes.push(Class {
            name,
            ns: NAMESPACES.choose(rng).unwrap(),
            keyword: if rng.gen_bool(0.7) { "class" } else { "struct" },
            template,
            bases,
            ctors,
            methods,
            fields,
            dtor: rng.gen_bool(0.2).then(|| rng.gen_bool(0.5)),
        });
    }

    let mut funcs = Vec::new();
    for i in 0..rng.gen_range(1..=cfg.max_functions.max(1)) {
        let template = rng.gen_bool(0.15);
        let mut overloads: Vec<Overload> = Vec::new();
        if template {
            overloads.push(Overload {
                ret: "T",
                params: vec!["T"],
                style: FStyle::Def,
            });
        } else {
            for _ in 0..rng.gen_range(1..=2) {
                let params = random_params(rng, 3);
                if overloads.iter().any(|o| o.params == params) {
                    continue;
                }
                let style = match rng.gen_range(0..4) {
                    0 | 1 => FStyle::Def,
                    2 => FStyle::DeclDef,
                    _ => FStyle::Decl,
                };
                overloads.push(Overload {
                    ret: RET_TYPES.choose(rng).unwrap(),
                    params,
                    style,
                });
            }
        }
        funcs.push(Func {
            name: format!("fn{i}"),
            ns: NAMESPACES.choose(rng).unwrap(),
            template,
            overloads,
        });
    }

    let mut entities: Vec<(Entity, &'static str)> = Vec::new();
    for (ci, c) in classes.iter().enumerate() {
        entities.push((Entity::Class(ci), c.ns));
        for (mi, m) in c.methods.iter().enumerate() {
            if m.style == MStyle::DeclOut {
                entities.push((Entity::OutOfClass(ci, mi), c.ns));
            }
        }
    }
    for (fi, f) in funcs.iter().enumerate() {
        for (oi, o) in f.overloads.iter().enumerate() {
            match o.style {
                FStyle::Def => entities.push((Entity::FnDef(fi, oi), f.ns)),
                FStyle::Decl => entities.push((Entity::FnDecl(fi, oi), f.ns)),
                FStyle::DeclDef => {
                    entities.push((Entity::FnDecl(fi, oi), f.ns));
                    entities.push((Entity::FnDef(fi, oi), f.ns));
                }
            }
        }
    }
    for k in 0..rng.gen_range(0..=2) {
        let ns = NAMESPACES.choose(rng).unwrap();
        let e = match classes.choose(rng) {
            Some(c) if rng.gen_bool(0.6) => Entity::Forward {
                name: c.name.clone(),
                keyword: c.keyword,
                template: c.template,
                ns: c.ns,
            },
            _ => Entity::Forward {
                name: format!("Fwd{k}"),
                keyword: if rng.gen_bool(0.5) { "class" } else { "struct" },
                template: rng.gen_bool(0.2),
                ns,
            },
        };
        let ens = match &e {
            Entity::Forward { ns, .. } => *ns,
            _ => unreachable!(),
        };
        entities.push((e, ens));
    }
    for k in 0..rng.gen_range(0..=1) {
        let ns = NAMESPACES.choose(rng).unwrap();
        entities.push((
            Entity::Enum {
                name: format!("E{k}"),
                scoped: rng.gen_bool(0.5),
            },
            ns,
        ));
    }
    for k in 0..rng.gen_range(0..=2) {
        let ns = NAMESPACES.choose(rng).unwrap();
        entities.push((
            Entity::Var {
                name: format!("gv{k}"),
                external: rng.gen_bool(0.3),
            },
            ns,
        ));
    }
    Plan {
        classes,
        funcs,
        entities,
    }
}

// ---- rendering ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CallKind {
    Plain,
    Member,
    Construct,
}

#[derive(Debug, Clone)]
struct DraftCall {
    caller: usize,
    text: String,
    kind: CallKind,
    class_scope: Option<String>,
    ns: String,
    line: u32,
    col: u32,
}

struct Draft {
    sym: RefSymbol,
    parent: Option<usize>,
}

struct FileOut {
    path: String,
    lines: Vec<String>,
    syms: Vec<Draft>,
    calls: Vec<DraftCall>,
}

impl FileOut {
    fn next_line(&self) -> u32 {
        self.lines.len() as u32 + 1
    }

    fn push(&mut self, line: String) -> u32 {
        self.lines.push(line);
        self.lines.len() as u32
    }

    #[allow(clippy::too_many_arguments)]
    fn symbol(
        &mut self,
        kind: &'static str,
        name: &str,
        qn: String,
        start: u32,
        end: u32,
        is_definition: bool,
        parent: Option<usize>,
    ) -> usize {
        self.syms.push(Draft {
            sym: RefSymbol {
                id: 0,
                kind,
                name: name.to_string(),
                qualified_name: qn,
                signature: String::new(),
                path: self.path.clone(),
                start_line: start,
                end_line: end,
                is_definition,
                template_params: String::new(),
                is_virtual: false,
                is_override: false,
                bases: Vec::new(),
            },
            parent,
        });
        self.syms.len() - 1
    }
}

struct BodyCtx {
    caller: usize,
    class: Option<usize>,
    class_scope: Option<String>,
    ns: String,
    indent: usize,
}

struct Renderer<'p, R: Rng + ?Sized> {
    rng: &'p mut R,
    plan: &'p Plan,
    tmp: usize,
}

fn render_params(params: &[&str], named: bool) -> String {
    params
        .iter()
        .enumerate()
        .map(|(i, t)| if named { format!("{t} a{i}") } else { t.to_string() })
        .collect::<Vec<_>>()
        .join(", ")
}

impl<'p, R: Rng + ?Sized> Renderer<'p, R> {
    fn class_methods_with_bases(&self, ci: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut stack = vec![ci];
        let mut seen = BTreeSet::new();
        while let Some(c) = stack.pop() {
            if !seen.insert(c) {
                continue;
            }
            out.extend(self.plan.classes[c].methods.iter().map(|m| m.name.clone()));
            stack.extend(self.plan.classes[c].bases.iter().map(|b| b.0));
        }
        out
    }

    fn body(&mut self, out: &mut FileOut, ctx: &BodyCtx) {
        let pad = " ".repeat(ctx.indent);
        let n = self.rng.gen_range(0..=3);
        for _ in 0..n {
            let args = if self.rng.gen_bool(0.5) { "1" } else { "" };
            let choice = self.rng.gen_range(0..9);
            let all_methods: Vec<String> = self
                .plan
                .classes
                .iter()
                .flat_map(|c| c.methods.iter().map(|m| m.name.clone()))
                .collect();
            // (statement, callee text, kind, column offset of the last name)
            let stmt: Option<(String, String, CallKind, usize)> = match choice {
                0 | 1 | 2 => {
                    let f = self.plan.funcs.choose(self.rng).unwrap();
                    let text = if !f.ns.is_empty() && self.rng.gen_bool(0.5) {
                        format!("{}::{}", f.ns, f.name)
                    } else if f.ns.is_empty() && self.rng.gen_bool(0.3) {
                        format!("::{}", f.name)
                    } else {
                        f.name.clone()
                    };
                    let off = text.len() - f.name.len();
                    Some((format!("{text}({args});"), text, CallKind::Plain, off))
                }
                3 => ctx.class.and_then(|ci| {
                    let names = self.class_methods_with_bases(ci);
                    names
                        .choose(self.rng)
                        .map(|m| (format!("{m}({args});"), m.clone(), CallKind::Plain, 0))
                }),
                4 => ctx.class.and_then(|ci| {
                    let names = self.class_methods_with_bases(ci);
                    names
                        .choose(self.rng)
                        .map(|m| (format!("this->{m}({args});"), m.clone(), CallKind::Member, 6))
                }),
                5 => all_methods
                    .choose(self.rng)
                    .map(|m| (format!("obj.{m}();"), m.clone(), CallKind::Member, 4)),
                6 | 7 => self.plan.classes.choose(self.rng).map(|c| {
                    let text = if !c.ns.is_empty() && self.rng.gen_bool(0.5) {
                        format!("{}::{}", c.ns, c.name)
                    } else {
                        c.name.clone()
                    };
                    let off = text.len() - c.name.len();
                    if choice == 6 {
                        self.tmp += 1;
                        (format!("{text} tmp{}({args});", self.tmp), text, CallKind::Construct, off)
                    } else {
                        (format!("{text}({args});"), text, CallKind::Plain, off)
                    }
                }),
                _ => {
                    let text = format!("ext_{}", self.rng.gen_range(0..3));
                    Some((format!("{text}({args});"), text, CallKind::Plain, 0))
                }
            };
            let Some((stmt, text, kind, off)) = stmt else {
                out.push(format!("{pad}int local = 0;"));
                continue;
            };
            let line = out.push(format!("{pad}{stmt}"));
            out.calls.push(DraftCall {
                caller: ctx.caller,
                text,
                kind,
                class_scope: ctx.class_scope.clone(),
                ns: ctx.ns.clone(),
                line,
                col: (ctx.indent + off + 1) as u32,
            });
        }
    }

    fn class(&mut self, out: &mut FileOut, ci: usize, parent: Option<usize>) {
        let c = &self.plan.classes[ci];
        let qn = qualify(c.ns, &c.name);
        let start = out.next_line();
        if c.template {
            out.push("template <typename T>".into());
        }
        let mut bases_written = Vec::new();
        let mut base_src = Vec::new();
        for &(b, qualified) in &c.bases {
            let bc = &self.plan.classes[b];
            let text = if qualified && !bc.ns.is_empty() {
                format!("{}::{}", bc.ns, bc.name)
            } else {
                bc.name.clone()
            };
            let targs = if bc.template { "<int>" } else { "" };
            let access = if self.rng.gen_bool(0.2) { "public virtual" } else { "public" };
            base_src.push(format!("{access} {text}{targs}"));
            bases_written.push(text);
        }
        let head = if base_src.is_empty() {
            format!("{} {} {{", c.keyword, c.name)
        } else {
            format!("{} {} : {} {{", c.keyword, c.name, base_src.join(", "))
        };
        out.push(head);
        let kind = if c.template {
            "template_class"
        } else if c.keyword == "class" {
            "class"
        } else {
            "struct"
        };
        let me = out.symbol(kind, &c.name, qn.clone(), start, 0, true, parent);
        if c.template {
            out.syms[me].sym.template_params = "typename T".into();
        }
        out.syms[me].sym.bases = bases_written;
        out.push("public:".into());

        #[derive(Clone, Copy)]
        enum Member {
            Ctor(usize),
            Method(usize),
            Field(usize),
            Dtor,
        }
        let mut members: Vec<Member> = (0..c.ctors.len()).map(Member::Ctor).collect();
        members.extend((0..c.methods.len()).map(Member::Method));
        members.extend((0..c.fields.len()).map(Member::Field));
        if c.dtor.is_some() {
            members.push(Member::Dtor);
        }
        members.shuffle(self.rng);
        for m in members {
            match m {
                Member::Ctor(k) => {
                    let (params, def) = &c.ctors[k];
                    let line_no = out.next_line();
                    let sig = signature(params, false);
                    if *def {
                        out.push(format!("    {}({}) {{", c.name, render_params(params, true)));
                        let id = out.symbol("constructor", &c.name, qualify(&qn, &c.name), line_no, 0, true, Some(me));
                        out.syms[id].sym.signature = sig;
                        let ctx = BodyCtx {
                            caller: id,
                            class: Some(ci),
                            class_scope: Some(qn.clone()),
                            ns: c.ns.to_string(),
                            indent: 8,
                        };
                        self.body(out, &ctx);
                        let end = out.push("    }".into());
                        out.syms[id].sym.end_line = end;
                    } else {
                        let named = self.rng.gen_bool(0.5);
                        out.push(format!("    {}({});", c.name, render_params(params, named)));
                        let id = out.symbol("constructor", &c.name, qualify(&qn, &c.name), line_no, line_no, false, Some(me));
                        out.syms[id].sym.signature = sig;
                    }
                }
                Member::Method(k) => {
                    let m = &c.methods[k];
                    let line_no = out.next_line();
                    let virt = if m.is_virtual { "virtual " } else { "" };
                    let cst = if m.is_const { " const" } else { "" };
                    let ovr = if m.is_override { " override" } else { "" };
                    let inline = m.style == MStyle::Inline;
                    let named = inline || self.rng.gen_bool(0.5);
                    let head = format!(
                        "    {virt}{} {}({}){cst}{ovr}",
                        m.ret,
                        m.name,
                        render_params(&m.params, named)
                    );
                    let id = if inline {
                        out.push(format!("{head} {{"));
                        let id = out.symbol("member_function", &m.name, qualify(&qn, &m.name), line_no, 0, true, Some(me));
                        let ctx = BodyCtx {
                            caller: id,
                            class: Some(ci),
                            class_scope: Some(qn.clone()),
                            ns: c.ns.to_string(),
                            indent: 8,
                        };
                        self.body(out, &ctx);
                        let end = out.push("    }".into());
                        out.syms[id].sym.end_line = end;
                        id
                    } else {
                        let pure = if m.pure { " = 0" } else { "" };
                        out.push(format!("{head}{pure};"));
                        out.symbol("member_function", &m.name, qualify(&qn, &m.name), line_no, line_no, false, Some(me))
                    };
                    let s = &mut out.syms[id].sym;
                    s.signature = signature(&m.params, m.is_const);
                    s.is_virtual = m.is_virtual;
                    s.is_override = m.is_override;
                }
                Member::Field(k) => {
                    let line_no = out.push(format!("    int {};", c.fields[k]));
                    out.symbol("variable", &c.fields[k], qualify(&qn, &c.fields[k]), line_no, line_no, true, Some(me));
                }
                Member::Dtor => {
                    let virt = c.dtor == Some(true);
                    let name = format!("~{}", c.name);
                    let line_no = out.push(format!("    {}{name}() {{", if virt { "virtual " } else { "" }));
                    let id = out.symbol("member_function", &name, qualify(&qn, &name), line_no, 0, true, Some(me));
                    out.syms[id].sym.signature = "()".into();
                    out.syms[id].sym.is_virtual = virt;
                    let end = out.push("    }".into());
                    out.syms[id].sym.end_line = end;
                }
            }
        }
        let end = out.push("};".into());
        out.syms[me].sym.end_line = end;
    }

    fn entity(&mut self, out: &mut FileOut, e: &Entity, ns: &str, parent: Option<usize>) {
        match e {
            Entity::Class(ci) => self.class(out, *ci, parent),
            Entity::OutOfClass(ci, mi) => {
                let c = &self.plan.classes[*ci];
                let m = &c.methods[*mi];
                let owner = qualify(c.ns, &c.name);
                let cst = if m.is_const { " const" } else { "" };
                let line_no = out.push(format!(
                    "{} {}::{}({}){cst} {{",
                    m.ret,
                    c.name,
                    m.name,
                    render_params(&m.params, true)
                ));
                let id = out.symbol("member_function", &m.name, qualify(&owner, &m.name), line_no, 0, true, parent);
                out.syms[id].sym.signature = signature(&m.params, m.is_const);
                let ctx = BodyCtx {
                    caller: id,
                    class: Some(*ci),
                    class_scope: Some(owner),
                    ns: ns.to_string(),
                    indent: 4,
                };
                self.body(out, &ctx);
                let end = out.push("}".into());
                out.syms[id].sym.end_line = end;
            }
            Entity::FnDecl(fi, oi) => {
                let f = &self.plan.funcs[*fi];
                let o = &f.overloads[*oi];
                let named = self.rng.gen_bool(0.5);
                let line_no = out.push(format!("{} {}({});", o.ret, f.name, render_params(&o.params, named)));
                let id = out.symbol("free_function", &f.name, qualify(f.ns, &f.name), line_no, line_no, false, parent);
                out.syms[id].sym.signature = signature(&o.params, false);
            }
            Entity::FnDef(fi, oi) => {
                let f = &self.plan.funcs[*fi];
                let o = &f.overloads[*oi];
                let start = out.next_line();
                if f.template {
                    out.push("template <typename T>".into());
                }
                out.push(format!("{} {}({}) {{", o.ret, f.name, render_params(&o.params, true)));
                let kind = if f.template { "template_function" } else { "free_function" };
                let id = out.symbol(kind, &f.name, qualify(f.ns, &f.name), start, 0, true, parent);
                out.syms[id].sym.signature = signature(&o.params, false);
                if f.template {
                    out.syms[id].sym.template_params = "typename T".into();
                }
                let ctx = BodyCtx {
                    caller: id,
                    class: None,
                    class_scope: None,
                    ns: ns.to_string(),
                    indent: 4,
                };
                self.body(out, &ctx);
                let end = out.push("}".into());
                out.syms[id].sym.end_line = end;
            }
            Entity::Forward {
                name,
                keyword,
                template,
                ..
            } => {
                let start = out.next_line();
                if *template {
                    out.push("template <typename T>".into());
                }
                let end = out.push(format!("{keyword} {name};"));
                let id = out.symbol("forward_declaration", name, qualify(ns, name), start, end, false, parent);
                if *template {
                    out.syms[id].sym.template_params = "typename T".into();
                }
            }
            Entity::Enum { name, scoped, .. } => {
                let kw = if *scoped { "enum class" } else { "enum" };
                let line_no = out.push(format!("{kw} {name} {{ {name}A, {name}B }};"));
                out.symbol("enum", name, qualify(ns, name), line_no, line_no, true, parent);
            }
            Entity::Var { name, external, .. } => {
                let text = if *external {
                    format!("extern int {name};")
                } else {
                    format!("int {name} = 3;")
                };
                let line_no = out.push(text);
                out.symbol("variable", name, qualify(ns, name), line_no, line_no, !external, parent);
            }
        }
    }

    /// One namespace block holding `items`.
    fn block(&mut self, out: &mut FileOut, ns: &str, items: &[Entity]) {
        let mut opened: Vec<usize> = Vec::new();
        if !ns.is_empty() {
            let parts: Vec<&str> = ns.split("::").collect();
            let compact = parts.len() > 1 && self.rng.gen_bool(0.5);
            if compact {
                let line = out.push(format!("namespace {ns} {{"));
                let mut prefix = String::new();
                for p in &parts {
                    prefix = qualify(&prefix, p);
                    let parent = opened.last().copied();
                    opened.push(out.symbol("namespace", p, prefix.clone(), line, 0, true, parent));
                }
            } else {
                let mut prefix = String::new();
                for p in &parts {
                    prefix = qualify(&prefix, p);
                    let line = out.push(format!("namespace {p} {{"));
                    let parent = opened.last().copied();
                    opened.push(out.symbol("namespace", p, prefix.clone(), line, 0, true, parent));
                }
            }
            if compact {
                for e in items {
                    self.entity(out, e, ns, opened.last().copied());
                }
                let end = out.push("}".into());
                for &o in &opened {
                    out.syms[o].sym.end_line = end;
                }
                out.push(String::new());
                return;
            }
        }
        for e in items {
            self.entity(out, e, ns, opened.last().copied());
        }
        for &o in opened.iter().rev() {
            let end = out.push("}".into());
            out.syms[o].sym.end_line = end;
        }
        out.push(String::new());
    }
}

/// Draws a corpus and its expected graph.
pub fn generate<R: Rng + ?Sized>(rng: &mut R, cfg: &CorpusConfig) -> Corpus {
    let plan = plan(rng, cfg);
    let n_files = rng.gen_range(1..=cfg.max_files.max(1));
    let mut per_file: Vec<Vec<(Entity, &'static str)>> = vec![Vec::new(); n_files];
    for (e, ns) in &plan.entities {
        per_file[rng.gen_range(0..n_files)].push((e.clone(), ns));
    }
    let mut outs = Vec::new();
    let mut renderer = Renderer {
        rng,
        plan: &plan,
        tmp: 0,
    };
    for (i, mut items) in per_file.into_iter().enumerate() {
        items.shuffle(renderer.rng);
        let ext = if i % 2 == 0 { "h" } else { "cpp" };
        let mut out = FileOut {
            path: format!("src/f{i}.{ext}"),
            lines: Vec::new(),
            syms: Vec::new(),
            calls: Vec::new(),
        };
        let mut k = 0;
        while k < items.len() {
            let ns = items[k].1;
            let mut group = Vec::new();
            while k < items.len() && items[k].1 == ns {
                group.push(items[k].0.clone());
                k += 1;
            }
            renderer.block(&mut out, ns, &group);
        }
        outs.push(out);
    }
    outs.sort_by(|a, b| a.path.cmp(&b.path));
    expected(outs)
}

// ---- reference resolution ----

fn exact(syms: &[RefSymbol], real: usize, qn: &str, accept: &dyn Fn(&RefSymbol) -> bool) -> Vec<u32> {
    syms[..real]
        .iter()
        .filter(|s| s.qualified_name == qn && accept(s))
        .map(|s| s.id)
        .collect()
}

fn suffix(syms: &[RefSymbol], real: usize, text: &str, accept: &dyn Fn(&RefSymbol) -> bool) -> Vec<u32> {
    let tail = format!("::{text}");
    syms[..real]
        .iter()
        .filter(|s| (s.qualified_name == text || s.qualified_name.ends_with(&tail)) && accept(s))
        .map(|s| s.id)
        .collect()
}

fn lookup(
    syms: &[RefSymbol],
    real: usize,
    text: &str,
    class_scope: Option<&str>,
    ns: &str,
    accept: &dyn Fn(&RefSymbol) -> bool,
) -> Vec<u32> {
    if let Some(g) = text.strip_prefix("::") {
        return exact(syms, real, g, accept);
    }
    if let Some(c) = class_scope {
        let hits = exact(syms, real, &qualify(c, text), accept);
        if !hits.is_empty() {
            return hits;
        }
    }
    let hits = exact(syms, real, &qualify(ns, text), accept);
    if !hits.is_empty() {
        return hits;
    }
    suffix(syms, real, text, accept)
}

fn parent_scope(qn: &str) -> &str {
    qn.rfind("::").map_or("", |i| &qn[..i])
}

fn expected(outs: Vec<FileOut>) -> Corpus {
    let mut symbols: Vec<RefSymbol> = Vec::new();
    let mut edges: Vec<RefEdge> = Vec::new();
    let mut calls: Vec<(u32, DraftCall)> = Vec::new();
    let mut files = Vec::new();
    for out in outs {
        let offset = symbols.len() as u32;
        for (i, d) in out.syms.iter().enumerate() {
            let mut s = d.sym.clone();
            s.id = offset + i as u32;
            symbols.push(s);
            if let Some(p) = d.parent {
                edges.push(RefEdge {
                    kind: RefEdgeKind::Contains,
                    from: offset + p as u32,
                    to: offset + i as u32,
                    site: None,
                });
            }
        }
        for c in out.calls {
            calls.push((offset + c.caller as u32, c));
        }
        let mut content = out.lines.join("\n");
        content.push('\n');
        files.push((out.path, content));
    }
    let real = symbols.len();

    let callable = |s: &RefSymbol| s.is_function() && s.kind != "constructor";
    let class_def = |s: &RefSymbol| s.is_class_def();
    let mut sentinels: BTreeMap<String, u32> = BTreeMap::new();
    for (caller, c) in &calls {
        let mut targets = match c.kind {
            CallKind::Plain | CallKind::Member => {
                lookup(&symbols, real, &c.text, c.class_scope.as_deref(), &c.ns, &callable)
            }
            CallKind::Construct => Vec::new(),
        };
        if targets.is_empty() && c.kind != CallKind::Member {
            let classes = lookup(&symbols, real, &c.text, c.class_scope.as_deref(), &c.ns, &class_def);
            for cl in classes {
                let class = symbols[cl as usize].clone();
                let ctor_qn = qualify(&class.qualified_name, &class.name);
                let ctors = exact(&symbols, real, &ctor_qn, &|s| s.kind == "constructor");
                if ctors.is_empty() {
                    targets.push(cl);
                } else {
                    targets.extend(ctors);
                }
            }
        }
        targets.sort_unstable();
        targets.dedup();
        if targets.is_empty() {
            let id = match sentinels.get(&c.text) {
                Some(&id) => id,
                None => {
                    let id = symbols.len() as u32;
                    let name = format!("unresolved:{}", c.text);
                    symbols.push(RefSymbol {
                        id,
                        kind: "free_function",
                        name: name.clone(),
                        qualified_name: name,
                        signature: String::new(),
                        path: String::new(),
                        start_line: 0,
                        end_line: 0,
                        is_definition: false,
                        template_params: String::new(),
                        is_virtual: false,
                        is_override: false,
                        bases: Vec::new(),
                    });
                    sentinels.insert(c.text.clone(), id);
                    id
                }
            };
            targets.push(id);
        }
        for t in targets {
            edges.push(RefEdge {
                kind: RefEdgeKind::Calls,
                from: *caller,
                to: t,
                site: Some((c.line, c.col)),
            });
        }
    }

    // inheritance
    let mut parents: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for s in &symbols[..real] {
        if !s.is_class_def() {
            continue;
        }
        for base in &s.bases {
            let mut scope = s.scope().to_string();
            let mut hits;
            loop {
                hits = exact(&symbols, real, &qualify(&scope, base), &class_def);
                hits.retain(|&h| h != s.id);
                if !hits.is_empty() || scope.is_empty() {
                    break;
                }
                scope = parent_scope(&scope).to_string();
            }
            if hits.is_empty() {
                hits = suffix(&symbols, real, base, &class_def);
                hits.retain(|&h| h != s.id);
            }
            for h in hits {
                edges.push(RefEdge {
                    kind: RefEdgeKind::InheritsFrom,
                    from: s.id,
                    to: h,
                    site: None,
                });
                parents.entry(s.id).or_default().insert(h);
            }
        }
    }

    // overloads: every pair of function records sharing a qualified name
    for a in &symbols[..real] {
        for b in &symbols[..real] {
            if a.id < b.id && a.is_function() && b.is_function() && a.qualified_name == b.qualified_name {
                edges.push(RefEdge {
                    kind: RefEdgeKind::OverloadOf,
                    from: a.id,
                    to: b.id,
                    site: None,
                });
            }
        }
    }

    // overrides: members of a class against members of every ancestor
    for c in &symbols[..real] {
        if !c.is_class_def() {
            continue;
        }
        let mut anc: BTreeSet<u32> = BTreeSet::new();
        let mut frontier: Vec<u32> = vec![c.id];
        while let Some(x) = frontier.pop() {
            for &p in parents.get(&x).into_iter().flatten() {
                if p != c.id && anc.insert(p) {
                    frontier.push(p);
                }
            }
        }
        let member_of = |s: &RefSymbol, owner: &str| s.is_function() && s.kind != "constructor" && s.scope() == owner;
        for a in anc {
            let aq = symbols[a as usize].qualified_name.clone();
            for m in &symbols[..real] {
                if !member_of(m, &c.qualified_name) {
                    continue;
                }
                for b in &symbols[..real] {
                    if member_of(b, &aq)
                        && m.id != b.id
                        && m.name == b.name
                        && m.signature == b.signature
                        && (b.is_virtual || m.is_override)
                    {
                        edges.push(RefEdge {
                            kind: RefEdgeKind::Overrides,
                            from: m.id,
                            to: b.id,
                            site: None,
                        });
                    }
                }
            }
        }
    }

    edges.sort();
    edges.dedup();
    Corpus { files, symbols, edges }
}

// ---- reference queries ----

fn valid_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c == '_' || c.is_ascii_alphabetic()) && cs.all(|c| c == '_' || c.is_ascii_alphanumeric())
}

fn valid_name(q: &str) -> bool {
    let q = q.strip_prefix("::").unwrap_or(q);
    !q.is_empty() && q.split("::").all(valid_ident)
}

fn suffix_match(qn: &str, q: &str) -> bool {
    qn == q || (qn.len() > q.len() + 2 && qn.ends_with(q) && qn[..qn.len() - q.len()].ends_with("::"))
}

/// Query name matching: bare names compare the name, qualified names a
/// `::`-aligned suffix, a leading `::` the whole qualified name.
pub fn name_matches(s: &RefSymbol, q: &str) -> bool {
    if let Some(x) = q.strip_prefix("::") {
        s.qualified_name == x
    } else if q.contains("::") {
        suffix_match(&s.qualified_name, q)
    } else {
        s.name == q
    }
}

impl Corpus {
    pub fn find_class(&self, name: &str) -> Result<Vec<u32>, &'static str> {
        if !valid_name(name) {
            return Err("NotFound");
        }
        let mut hits: Vec<&RefSymbol> = self
            .symbols
            .iter()
            .filter(|s| s.is_class_def() && name_matches(s, name))
            .collect();
        hits.sort_by(|a, b| {
            (&a.qualified_name, &a.path, a.start_line, a.end_line).cmp(&(&b.qualified_name, &b.path, b.start_line, b.end_line))
        });
        Ok(hits.into_iter().map(|s| s.id).collect())
    }

    pub fn find_function(&self, scope: &str, name: &str) -> Result<Vec<u32>, &'static str> {
        let scope = scope.strip_prefix("::").unwrap_or(scope);
        if !scope.is_empty() && !self.symbols.iter().any(|s| s.qualified_name == scope) {
            return Err("ScopeNotFound");
        }
        let mut hits: Vec<&RefSymbol> = self
            .symbols
            .iter()
            .filter(|s| s.is_function() && !s.is_sentinel() && s.name == name)
            .filter(|s| {
                let sc = s.scope();
                scope.is_empty() || sc == scope || sc.starts_with(&format!("{scope}::"))
            })
            .collect();
        hits.sort_by(|a, b| {
            (&a.qualified_name, !a.is_definition, &a.path, a.start_line, a.end_line).cmp(&(
                &b.qualified_name,
                !b.is_definition,
                &b.path,
                b.start_line,
                b.end_line,
            ))
        });
        Ok(hits.into_iter().map(|s| s.id).collect())
    }

    /// `(focus, ancestors, descendants)`, each list ordered by distance,
    /// then qualified name, then id.
    #[allow(clippy::type_complexity)]
    pub fn inheritance_chain(&self, name: &str) -> Result<(u32, Vec<u32>, Vec<u32>), &'static str> {
        let cands: Vec<&RefSymbol> = self
            .symbols
            .iter()
            .filter(|s| s.is_class_def() && name_matches(s, name))
            .collect();
        let focus = match cands.as_slice() {
            [] => return Err("UnknownClass"),
            [one] => one.id,
            _ => return Err("AmbiguousName"),
        };
        let inherits: Vec<(u32, u32)> = self
            .edges
            .iter()
            .filter(|e| e.kind == RefEdgeKind::InheritsFrom)
            .map(|e| (e.from, e.to))
            .collect();
        let up = crate::oracles::shortest_hops(self.symbols.len(), &inherits, focus);
        let flipped: Vec<(u32, u32)> = inherits.iter().map(|&(a, b)| (b, a)).collect();
        let down = crate::oracles::shortest_hops(self.symbols.len(), &flipped, focus);
        let order = |dist: Vec<Option<usize>>| {
            let mut v: Vec<(usize, &str, u32)> = dist
                .iter()
                .enumerate()
                .filter_map(|(i, d)| d.filter(|&d| d > 0).map(|d| (d, self.symbols[i].qualified_name.as_str(), i as u32)))
                .collect();
            v.sort();
            v.into_iter().map(|x| x.2).collect::<Vec<u32>>()
        };
        Ok((focus, order(up), order(down)))
    }

    /// `(caller, callee, path, line, column)` in call-site order.
    #[allow(clippy::type_complexity)]
    pub fn function_calls(&self, class: &str, function: &str) -> Result<Vec<(u32, u32, String, u32, u32)>, &'static str> {
        let callers: BTreeSet<u32> = self
            .symbols
            .iter()
            .filter(|s| s.is_function() && !s.is_sentinel() && s.name == function)
            .filter(|s| {
                if class.is_empty() {
                    true
                } else if let Some(x) = class.strip_prefix("::") {
                    s.scope() == x
                } else {
                    suffix_match(s.scope(), class)
                }
            })
            .map(|s| s.id)
            .collect();
        if callers.is_empty() {
            return Err("UnknownFunction");
        }
        let mut out: Vec<(String, u32, u32, u32, u32)> = self
            .edges
            .iter()
            .filter(|e| e.kind == RefEdgeKind::Calls && callers.contains(&e.from))
            .map(|e| {
                let (l, c) = e.site.unwrap_or((0, 0));
                (self.symbols[e.from as usize].path.clone(), l, c, e.from, e.to)
            })
            .collect();
        out.sort();
        Ok(out.into_iter().map(|(p, l, c, f, t)| (f, t, p, l, c)).collect())
    }
}

/// A single-file corpus whose classes form a random DAG: class `i` may
/// derive from any `j < i`. Returns the source and each class's bases.
pub fn class_dag<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (String, Vec<Vec<usize>>) {
    let mut src = String::new();
    let mut parents = Vec::with_capacity(n);
    for i in 0..n {
        let mut ps: Vec<usize> = (0..i).filter(|_| rng.gen_bool(0.25)).collect();
        ps.truncate(3);
        if ps.is_empty() {
            src.push_str(&format!("class K{i} {{\npublic:\n    virtual ~K{i}() {{}}\n}};\n"));
        } else {
            let bases: Vec<String> = ps.iter().map(|p| format!("public K{p}")).collect();
            src.push_str(&format!("class K{i} : {} {{\n}};\n", bases.join(", ")));
        }
        parents.push(ps);
    }
    (src, parents)
}
