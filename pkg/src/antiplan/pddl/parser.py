"""Reader for the STRIPS + action-costs subset of PDDL used by the blockworld domain.

Supported: untyped parameters, conjunctions of positive atoms in
preconditions and goals, add/delete effects, and ``(increase (total-cost) X)``
where X is a number or a ``(function ?args)`` term resolved at grounding.
Anything else raises :class:`FeatureUnsupported` with its source location.
Symbols are case-sensitive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

SUPPORTED_REQUIREMENTS = {":strips", ":action-costs"}
UNSUPPORTED_FORMS = {
    "or", "forall", "exists", "when", "imply", "not", "=", "either",
    "increase", "decrease", "assign", "scale-up", "scale-down",
}


class PddlError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class PddlSyntaxError(PddlError):
    pass


class FeatureUnsupported(PddlError):
    def __init__(self, construct: str, line: int, col: int):
        super().__init__(f"unsupported PDDL feature {construct!r}", line, col)
        self.construct = construct


# ---------------------------------------------------------------------------
# S-expressions
# ---------------------------------------------------------------------------


@dataclass
class Sym:
    text: str
    line: int
    col: int

    def __repr__(self):
        return self.text


@dataclass
class SList:
    items: list
    line: int
    col: int

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def head(self) -> str | None:
        if self.items and isinstance(self.items[0], Sym):
            return self.items[0].text
        return None


Node = Union[Sym, SList]


def read_sexprs(text: str | bytes) -> list[SList]:
    """Tokenize and read every top-level list in ``text``."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise PddlSyntaxError(f"input is not UTF-8 ({exc.reason})", 1, 1) from None
    stack: list[SList] = []
    top: list[SList] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        if c == "(":
            stack.append(SList([], line, col))
            i += 1
            col += 1
            continue
        if c == ")":
            if not stack:
                raise PddlSyntaxError("unexpected ')'", line, col)
            done = stack.pop()
            if stack:
                stack[-1].items.append(done)
            else:
                top.append(done)
            i += 1
            col += 1
            continue
        start_col = col
        j = i
        while j < n and not text[j].isspace() and text[j] not in "();":
            j += 1
        tok = text[i:j]
        col += j - i
        i = j
        if not stack:
            raise PddlSyntaxError(f"token {tok!r} outside any list", line, start_col)
        stack[-1].items.append(Sym(tok, line, start_col))
    if stack:
        s = stack[-1]
        raise PddlSyntaxError("unbalanced '(' opened here", s.line, s.col)
    if not top:
        raise PddlSyntaxError("empty input; expected '(define ...)'", 1, 1)
    return top


# ---------------------------------------------------------------------------
# Domain / problem model
# ---------------------------------------------------------------------------

Atom = tuple  # (predicate, arg, arg, ...)


@dataclass(frozen=True)
class CostTerm:
    """Symbolic cost ``(function args...)`` looked up in the problem's numeric init."""

    function: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class ActionSchema:
    name: str
    parameters: tuple[str, ...]
    precondition: tuple[Atom, ...]
    add: tuple[Atom, ...]
    delete: tuple[Atom, ...]
    cost: float | CostTerm = 0.0


@dataclass(frozen=True)
class PddlDomain:
    name: str
    requirements: tuple[str, ...]
    predicates: tuple[tuple[str, int], ...]
    functions: tuple[tuple[str, int], ...]
    actions: tuple[ActionSchema, ...]

    def action(self, name: str) -> ActionSchema:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)


@dataclass(frozen=True)
class PddlProblem:
    name: str
    domain: str
    objects: tuple[str, ...]
    init: tuple[Atom, ...]
    goal: tuple[Atom, ...]
    numeric: dict = field(default_factory=dict, hash=False, compare=False)


def _expect_sym(node: Node, what: str) -> Sym:
    if not isinstance(node, Sym):
        raise PddlSyntaxError(f"expected {what}, found a list", node.line, node.col)
    return node


def _expect_list(node: Node, what: str) -> SList:
    if not isinstance(node, SList):
        raise PddlSyntaxError(f"expected {what}, found {node.text!r}", node.line, node.col)
    return node


def _atom(node: Node, context: str) -> Atom:
    lst = _expect_list(node, f"an atom in {context}")
    if not lst.items:
        raise PddlSyntaxError(f"empty atom in {context}", lst.line, lst.col)
    head = lst.items[0]
    if isinstance(head, SList):
        raise PddlSyntaxError(f"atom in {context} must start with a predicate name", head.line, head.col)
    if head.text in UNSUPPORTED_FORMS:
        raise FeatureUnsupported(head.text, head.line, head.col)
    if head.text == "and":
        raise PddlSyntaxError(f"nested 'and' in {context}", head.line, head.col)
    args = []
    for a in lst.items[1:]:
        if isinstance(a, SList):
            raise FeatureUnsupported("function terms in atoms", a.line, a.col)
        args.append(a.text)
    return (head.text, *args)


def _conjunction(node: Node, context: str) -> list[Atom]:
    lst = _expect_list(node, context)
    if lst.head() == "and":
        return [_atom(x, context) for x in lst.items[1:]]
    if not lst.items:
        return []
    return [_atom(lst, context)]


def _effects(node: Node) -> tuple[list[Atom], list[Atom], float | CostTerm]:
    lst = _expect_list(node, "an effect")
    items = lst.items[1:] if lst.head() == "and" else [lst]
    add, delete = [], []
    cost: float | CostTerm = 0.0
    for item in items:
        el = _expect_list(item, "an effect")
        h = el.head()
        if h == "not":
            if len(el) != 2:
                raise PddlSyntaxError("'not' takes one atom", el.line, el.col)
            delete.append(_atom(el.items[1], "effect"))
        elif h == "increase":
            if len(el) != 3:
                raise PddlSyntaxError("'increase' takes two arguments", el.line, el.col)
            target = el.items[1]
            if not (isinstance(target, SList) and target.head() == "total-cost" and len(target) == 1):
                raise FeatureUnsupported("numeric fluents other than total-cost", el.line, el.col)
            amount = el.items[2]
            if isinstance(amount, Sym):
                try:
                    value = float(amount.text)
                except ValueError:
                    raise PddlSyntaxError(f"bad cost {amount.text!r}", amount.line, amount.col) from None
                if value < 0:
                    raise PddlSyntaxError("action cost must be non-negative", amount.line, amount.col)
                cost = value
            else:
                fn = amount.head()
                if fn is None or any(isinstance(a, SList) for a in amount.items[1:]):
                    raise FeatureUnsupported("compound cost expressions", amount.line, amount.col)
                if fn in ("+", "-", "*", "/"):
                    raise FeatureUnsupported(fn, amount.line, amount.col)
                cost = CostTerm(fn, tuple(a.text for a in amount.items[1:]))
        elif h in UNSUPPORTED_FORMS:
            raise FeatureUnsupported(h, el.line, el.col)
        else:
            add.append(_atom(el, "effect"))
    return add, delete, cost


def _parameters(node: Node) -> tuple[str, ...]:
    lst = _expect_list(node, "a parameter list")
    params = []
    for p in lst.items:
        p = _expect_sym(p, "a parameter")
        if p.text == "-":
            raise FeatureUnsupported("typing", p.line, p.col)
        if not p.text.startswith("?"):
            raise PddlSyntaxError(f"parameter {p.text!r} must start with '?'", p.line, p.col)
        params.append(p.text)
    if len(set(params)) != len(params):
        raise PddlSyntaxError("duplicate parameter", lst.line, lst.col)
    return tuple(params)


def _action(lst: SList) -> ActionSchema:
    if len(lst) < 2:
        raise PddlSyntaxError("action needs a name", lst.line, lst.col)
    name = _expect_sym(lst.items[1], "an action name").text
    fields: dict[str, Node] = {}
    items = lst.items[2:]
    if len(items) % 2:
        raise PddlSyntaxError(f"action {name}: dangling keyword", lst.line, lst.col)
    for key, value in zip(items[::2], items[1::2]):
        key = _expect_sym(key, "an action keyword")
        if key.text not in (":parameters", ":precondition", ":effect"):
            raise FeatureUnsupported(key.text, key.line, key.col)
        fields[key.text] = value
    params = _parameters(fields[":parameters"]) if ":parameters" in fields else ()
    pre = _conjunction(fields[":precondition"], "precondition") if ":precondition" in fields else []
    add, delete, cost = _effects(fields[":effect"]) if ":effect" in fields else ([], [], 0.0)
    used = {a for atom in pre + add + delete for a in atom[1:] if a.startswith("?")}
    if isinstance(cost, CostTerm):
        used |= {a for a in cost.args if a.startswith("?")}
    unbound = used - set(params)
    if unbound:
        raise PddlSyntaxError(f"action {name}: unbound variables {sorted(unbound)}", lst.line, lst.col)
    return ActionSchema(name, params, tuple(pre), tuple(add), tuple(delete), cost)


def _signature(node: Node) -> tuple[str, int]:
    lst = _expect_list(node, "a predicate declaration")
    head = _expect_sym(lst.items[0], "a predicate name") if lst.items else None
    if head is None:
        raise PddlSyntaxError("empty declaration", lst.line, lst.col)
    for a in lst.items[1:]:
        if isinstance(a, Sym) and a.text == "-":
            raise FeatureUnsupported("typing", a.line, a.col)
    return head.text, len(lst.items) - 1


def parse_domain(text: str | bytes) -> PddlDomain:
    """Parse a domain file.  A bare ``(:action ...)`` form is also accepted."""
    forms = read_sexprs(text)
    if forms[0].head() == ":action":
        actions = tuple(_action(f) for f in forms)
        return _check_domain(PddlDomain("anonymous", (), (), (), actions), forms[0])
    if len(forms) != 1:
        f = forms[1]
        raise PddlSyntaxError("trailing content after domain", f.line, f.col)
    top = forms[0]
    if top.head() != "define" or len(top) < 2:
        raise PddlSyntaxError("expected '(define (domain NAME) ...)'", top.line, top.col)
    header = _expect_list(top.items[1], "(domain NAME)")
    if header.head() != "domain" or len(header) != 2:
        raise PddlSyntaxError("expected '(domain NAME)'", header.line, header.col)
    name = _expect_sym(header.items[1], "a domain name").text
    reqs: list[str] = []
    preds: list[tuple[str, int]] = []
    funcs: list[tuple[str, int]] = []
    actions: list[ActionSchema] = []
    for section in top.items[2:]:
        section = _expect_list(section, "a domain section")
        h = section.head()
        if h == ":requirements":
            for r in section.items[1:]:
                r = _expect_sym(r, "a requirement")
                if r.text not in SUPPORTED_REQUIREMENTS:
                    raise FeatureUnsupported(r.text, r.line, r.col)
                reqs.append(r.text)
        elif h == ":predicates":
            preds.extend(_signature(p) for p in section.items[1:])
        elif h == ":functions":
            for f in section.items[1:]:
                if isinstance(f, Sym):
                    raise FeatureUnsupported("typed functions", f.line, f.col)
                funcs.append(_signature(f))
        elif h == ":action":
            actions.append(_action(section))
        elif h in (":types", ":constants", ":derived", ":durative-action", ":axiom"):
            raise FeatureUnsupported(h, section.line, section.col)
        else:
            raise PddlSyntaxError(f"unknown domain section {h!r}", section.line, section.col)
    return _check_domain(PddlDomain(name, tuple(reqs), tuple(preds), tuple(funcs), tuple(actions)), top)


def _check_domain(d: PddlDomain, where: SList) -> PddlDomain:
    names = [a.name for a in d.actions]
    dup = {n for n in names if names.count(n) > 1}
    if dup:
        raise PddlSyntaxError(f"duplicate action names {sorted(dup)}", where.line, where.col)
    return d


def parse_problem(text: str | bytes) -> PddlProblem:
    forms = read_sexprs(text)
    top = forms[0]
    if len(forms) != 1:
        raise PddlSyntaxError("trailing content after problem", forms[1].line, forms[1].col)
    if top.head() != "define" or len(top) < 2:
        raise PddlSyntaxError("expected '(define (problem NAME) ...)'", top.line, top.col)
    header = _expect_list(top.items[1], "(problem NAME)")
    if header.head() != "problem" or len(header) != 2:
        raise PddlSyntaxError("expected '(problem NAME)'", header.line, header.col)
    name = _expect_sym(header.items[1], "a problem name").text
    domain = ""
    objects: list[str] = []
    init: list[Atom] = []
    numeric: dict[tuple, float] = {}
    goal: list[Atom] = []
    for section in top.items[2:]:
        section = _expect_list(section, "a problem section")
        h = section.head()
        if h in (":domain", ":goal") and len(section) != 2:
            raise PddlSyntaxError(f"{h} takes exactly one argument", section.line, section.col)
        if h == ":domain":
            domain = _expect_sym(section.items[1], "a domain name").text
        elif h == ":objects":
            for o in section.items[1:]:
                o = _expect_sym(o, "an object name")
                if o.text == "-":
                    raise FeatureUnsupported("typing", o.line, o.col)
                objects.append(o.text)
        elif h == ":init":
            for item in section.items[1:]:
                item = _expect_list(item, "an init atom")
                if item.head() == "=":
                    if len(item) != 3 or not isinstance(item.items[1], SList):
                        raise PddlSyntaxError("numeric init must be (= (f args) value)", item.line, item.col)
                    term = item.items[1]
                    val = _expect_sym(item.items[2], "a number")
                    try:
                        value = float(val.text)
                    except ValueError:
                        raise PddlSyntaxError(f"bad number {val.text!r}", val.line, val.col) from None
                    key = tuple(_expect_sym(x, "a symbol").text for x in term.items)
                    numeric[key] = value
                else:
                    init.append(_atom(item, "init"))
        elif h == ":goal":
            goal.extend(_conjunction(section.items[1], "goal"))
        elif h == ":metric":
            rest = [x.text if isinstance(x, Sym) else x.head() for x in section.items[1:]]
            if rest != ["minimize", "total-cost"]:
                raise FeatureUnsupported("metric other than (minimize (total-cost))", section.line, section.col)
        else:
            raise FeatureUnsupported(str(h), section.line, section.col)
    return PddlProblem(name, domain, tuple(objects), tuple(init), tuple(goal), numeric)
