"""Regex compilation to a total, minimized DFA over character classes.

Supported subset: literals, escapes (\\d \\w \\s and friends), classes with
ranges and negation, ``.``, grouping, alternation, ``* + ?`` and bounded
``{m}``/``{m,}``/``{m,n}`` repetition, plus a leading ``^`` and trailing
``$``. Matching follows search semantics: an unanchored side is padded with
an implicit any-char loop, so ``accepts(s)`` agrees with ``re.search``.

The construction pipeline is syntax tree -> Thompson NFA -> subset
construction -> Moore minimization. The alphabet is partitioned into the
characters that appear explicitly in the pattern plus one OTHER bucket, so
DFAs stay small regardless of the real character universe.
"""

from __future__ import annotations

from dataclasses import dataclass

from sicql.errors import RegexSupportError

MAX_REPEAT = 2048
_CLASS_ESCAPES = {
    "d": frozenset("0123456789"),
    "w": frozenset("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_"),
    "s": frozenset(" \t\n\r\f\v"),
}
_CHAR_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "f": "\f", "v": "\v", "0": "\0"}

#: Transition-table key for "any character not explicit in the pattern".
OTHER = None


@dataclass(frozen=True)
class CharSet:
    chars: frozenset[str]
    negated: bool = False

    def matches_atom(self, atom: str | None) -> bool:
        if atom is OTHER:
            return self.negated
        return (atom in self.chars) != self.negated


ANY = CharSet(frozenset(), negated=True)
DOT = CharSet(frozenset({"\n"}), negated=True)


def _charset_union(a: CharSet, b: CharSet) -> CharSet:
    if not a.negated and not b.negated:
        return CharSet(a.chars | b.chars)
    if a.negated and b.negated:
        return CharSet(a.chars & b.chars, negated=True)
    pos, neg = (a, b) if not a.negated else (b, a)
    return CharSet(neg.chars - pos.chars, negated=True)


@dataclass(frozen=True)
class RSet:
    cs: CharSet


@dataclass(frozen=True)
class RConcat:
    items: tuple


@dataclass(frozen=True)
class RAlt:
    items: tuple


@dataclass(frozen=True)
class RRepeat:
    item: object
    lo: int
    hi: int | None  # None = unbounded


# ---------------------------------------------------------------------------
# Pattern parsing
# ---------------------------------------------------------------------------

class _PatternParser:
    def __init__(self, pattern: str):
        self.pattern = pattern
        self.pos = 0

    def error(self, msg: str) -> RegexSupportError:
        return RegexSupportError(f"{msg} at position {self.pos} in pattern {self.pattern!r}")

    def peek(self) -> str:
        return self.pattern[self.pos] if self.pos < len(self.pattern) else ""

    def take(self) -> str:
        ch = self.peek()
        self.pos += 1
        return ch

    def parse(self) -> object:
        node = self.parse_alt()
        if self.pos != len(self.pattern):
            raise self.error(f"unexpected {self.peek()!r}")
        return node

    def parse_alt(self) -> object:
        branches = [self.parse_concat()]
        while self.peek() == "|":
            self.take()
            branches.append(self.parse_concat())
        if len(branches) == 1:
            return branches[0]
        return RAlt(items=tuple(branches))

    def parse_concat(self) -> object:
        items = []
        while self.peek() not in ("", "|", ")"):
            items.append(self.parse_repeat())
        if len(items) == 1:
            return items[0]
        return RConcat(items=tuple(items))

    def parse_repeat(self) -> object:
        node = self.parse_atom()
        while True:
            ch = self.peek()
            if ch == "*":
                self.take()
                node = RRepeat(node, 0, None)
            elif ch == "+":
                self.take()
                node = RRepeat(node, 1, None)
            elif ch == "?":
                self.take()
                node = RRepeat(node, 0, 1)
            elif ch == "{":
                node = self.parse_braces(node)
            else:
                return node

    def parse_braces(self, node) -> RRepeat:
        assert self.take() == "{"
        lo = self.parse_int()
        hi: int | None = lo
        if self.peek() == ",":
            self.take()
            hi = self.parse_int() if self.peek().isdigit() else None
        if self.take() != "}":
            raise self.error("malformed {m,n} repetition")
        if hi is not None and hi < lo:
            raise self.error(f"repetition bounds reversed {{{lo},{hi}}}")
        if lo > MAX_REPEAT or (hi or 0) > MAX_REPEAT:
            raise self.error(f"repetition bound exceeds {MAX_REPEAT}")
        return RRepeat(node, lo, hi)

    def parse_int(self) -> int:
        digits = []
        while self.peek().isdigit():
            digits.append(self.take())
        if not digits:
            raise self.error("expected a number in {m,n}")
        return int("".join(digits))

    def parse_atom(self) -> object:
        ch = self.peek()
        if ch == "(":
            self.take()
            if self.peek() == "?":
                raise self.error("(?...) groups are not supported")
            inner = self.parse_alt()
            if self.take() != ")":
                raise self.error("unbalanced parenthesis")
            return inner
        if ch == "[":
            return RSet(self.parse_class())
        if ch == ".":
            self.take()
            return RSet(DOT)
        if ch == "\\":
            return RSet(self.parse_escape())
        if ch in ("*", "+", "?", "{"):
            raise self.error(f"quantifier {ch!r} with nothing to repeat")
        if ch in ("^", "$"):
            raise self.error("anchors are only supported at the pattern edges")
        if ch in (")", "|", ""):
            raise self.error(f"unexpected {ch!r}")
        self.take()
        return RSet(CharSet(frozenset({ch})))

    def parse_escape(self) -> CharSet:
        assert self.take() == "\\"
        ch = self.take()
        if ch == "":
            raise self.error("dangling backslash")
        if ch.isdigit() and ch != "0":
            raise self.error("backreferences are not supported")
        low = ch.lower()
        if low in _CLASS_ESCAPES:
            base = _CLASS_ESCAPES[low]
            return CharSet(base, negated=ch.isupper())
        if ch in _CHAR_ESCAPES:
            return CharSet(frozenset({_CHAR_ESCAPES[ch]}))
        return CharSet(frozenset({ch}))

    def parse_class(self) -> CharSet:
        assert self.take() == "["
        complement = False
        if self.peek() == "^":
            complement = True
            self.take()
        acc = CharSet(frozenset())  # empty positive set; identity for union
        first = True
        while True:
            ch = self.peek()
            if ch == "":
                raise self.error("unterminated character class")
            if ch == "]" and not first:
                self.take()
                if complement:
                    return CharSet(acc.chars, negated=not acc.negated)
                return acc
            first = False
            if ch == "\\":
                acc = _charset_union(acc, self.parse_escape())
                continue
            self.take()
            if self.peek() == "-" and self.pos + 1 < len(self.pattern) and self.pattern[self.pos + 1] != "]":
                self.take()
                hi = self.take()
                if hi == "\\":
                    hi = self.take()
                if ord(hi) < ord(ch):
                    raise self.error(f"reversed class range {ch}-{hi}")
                if ord(hi) - ord(ch) > 4096:
                    raise self.error("class range too large")
                span = frozenset(chr(c) for c in range(ord(ch), ord(hi) + 1))
                acc = _charset_union(acc, CharSet(span))
            else:
                acc = _charset_union(acc, CharSet(frozenset({ch})))


def _strip_anchors(pattern: str) -> tuple[str, bool, bool]:
    anchored_start = pattern.startswith("^")
    if anchored_start:
        pattern = pattern[1:]
    anchored_end = False
    if pattern.endswith("$"):
        backslashes = 0
        i = len(pattern) - 2
        while i >= 0 and pattern[i] == "\\":
            backslashes += 1
            i -= 1
        if backslashes % 2 == 0:
            anchored_end = True
            pattern = pattern[:-1]
    return pattern, anchored_start, anchored_end


def strict_end_pattern(pattern: str) -> str:
    """Rewrite per-branch trailing ``$`` to ``\\Z`` for Python's ``re``.

    The dialect's anchors are strict end-of-string (RE2-style); Python's
    ``$`` also matches before a trailing newline. Deterministic checks that
    delegate to ``re`` use this rewrite so both enforcement routes agree.
    """
    out = []
    for branch in _split_top_alternation(pattern):
        core, a_start, a_end = _strip_anchors(branch)
        out.append(("^" if a_start else "") + core + (r"\Z" if a_end else ""))
    return "|".join(out)


def _split_top_alternation(pattern: str) -> list[str]:
    """Split on ``|`` at nesting depth zero; anchors bind per branch."""
    branches: list[str] = []
    buf: list[str] = []
    depth = 0
    in_class = False
    class_start = -1
    i = 0
    while i < len(pattern):
        ch = pattern[i]
        if ch == "\\" and i + 1 < len(pattern):
            buf.append(pattern[i : i + 2])
            i += 2
            continue
        if in_class:
            # ']' right after '[' or '[^' is a literal member.
            if ch == "]" and i > class_start + (2 if pattern[class_start + 1 : class_start + 2] == "^" else 1):
                in_class = False
        elif ch == "[":
            in_class = True
            class_start = i
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth = max(0, depth - 1)
        elif ch == "|" and depth == 0:
            branches.append("".join(buf))
            buf = []
            i += 1
            continue
        buf.append(ch)
        i += 1
    branches.append("".join(buf))
    return branches


# ---------------------------------------------------------------------------
# NFA construction (Thompson)
# ---------------------------------------------------------------------------

class _NFA:
    def __init__(self):
        self.eps: list[list[int]] = []
        self.edges: list[list[tuple[CharSet, int]]] = []

    def new_state(self) -> int:
        self.eps.append([])
        self.edges.append([])
        return len(self.eps) - 1

    def add_eps(self, a: int, b: int) -> None:
        self.eps[a].append(b)

    def add_edge(self, a: int, cs: CharSet, b: int) -> None:
        self.edges[a].append((cs, b))

    def compile(self, node) -> tuple[int, int]:
        if isinstance(node, RSet):
            s, e = self.new_state(), self.new_state()
            self.add_edge(s, node.cs, e)
            return s, e
        if isinstance(node, RConcat):
            s = e = self.new_state()
            for item in node.items:
                fs, fe = self.compile(item)
                self.add_eps(e, fs)
                e = fe
            return s, e
        if isinstance(node, RAlt):
            s, e = self.new_state(), self.new_state()
            for item in node.items:
                fs, fe = self.compile(item)
                self.add_eps(s, fs)
                self.add_eps(fe, e)
            return s, e
        if isinstance(node, RRepeat):
            s = e = self.new_state()
            for _ in range(node.lo):
                fs, fe = self.compile(node.item)
                self.add_eps(e, fs)
                e = fe
            if node.hi is None:
                fs, fe = self.compile(node.item)
                loop_exit = self.new_state()
                self.add_eps(e, fs)
                self.add_eps(e, loop_exit)
                self.add_eps(fe, fs)
                self.add_eps(fe, loop_exit)
                return s, loop_exit
            for _ in range(node.hi - node.lo):
                fs, fe = self.compile(node.item)
                nxt = self.new_state()
                self.add_eps(e, fs)
                self.add_eps(e, nxt)
                self.add_eps(fe, nxt)
                e = nxt
            return s, e
        raise RegexSupportError(f"unhandled regex node {type(node).__name__}")

    def closure(self, states: frozenset[int]) -> frozenset[int]:
        out = set(states)
        stack = list(states)
        while stack:
            s = stack.pop()
            for t in self.eps[s]:
                if t not in out:
                    out.add(t)
                    stack.append(t)
        return frozenset(out)


# ---------------------------------------------------------------------------
# DFA
# ---------------------------------------------------------------------------

class RegexDfa:
    """Total, minimized DFA; transition keys are explicit chars plus OTHER."""

    def __init__(
        self,
        pattern: str,
        explicit: frozenset[str],
        transitions: list[dict],
        accepting: frozenset[int],
        start: int,
    ):
        self.pattern = pattern
        self.explicit = explicit
        self.transitions = transitions
        self.accepting = accepting
        self._start = start
        self.alive = self._co_reachable()

    @property
    def start(self) -> int:
        return self._start

    @property
    def n_states(self) -> int:
        return len(self.transitions)

    def _co_reachable(self) -> frozenset[int]:
        reverse: dict[int, set[int]] = {i: set() for i in range(len(self.transitions))}
        for i, row in enumerate(self.transitions):
            for target in row.values():
                reverse[target].add(i)
        alive = set(self.accepting)
        stack = list(alive)
        while stack:
            s = stack.pop()
            for p in reverse[s]:
                if p not in alive:
                    alive.add(p)
                    stack.append(p)
        return frozenset(alive)

    def total_step(self, state: int, symbol: str) -> int:
        row = self.transitions[state]
        return row[symbol] if symbol in self.explicit else row[OTHER]

    def step(self, state: int, symbol: str) -> int | None:
        """Masking transition: None once acceptance becomes impossible."""
        nxt = self.total_step(state, symbol)
        return nxt if nxt in self.alive else None

    def is_accepting(self, state: int) -> bool:
        return state in self.accepting

    def accepts(self, text: str) -> bool:
        state = self._start
        for ch in text:
            state = self.total_step(state, ch)
        return state in self.accepting


def regex_to_dfa(pattern: str) -> RegexDfa:
    pad = RRepeat(RSet(ANY), 0, None)
    branches = []
    for branch in _split_top_alternation(pattern):
        core, anchored_start, anchored_end = _strip_anchors(branch)
        sub = _PatternParser(core).parse()
        items = []
        if not anchored_start:
            items.append(pad)
        items.append(sub)
        if not anchored_end:
            items.append(pad)
        branches.append(RConcat(items=tuple(items)))
    tree = branches[0] if len(branches) == 1 else RAlt(items=tuple(branches))

    nfa = _NFA()
    start, accept = nfa.compile(tree)

    explicit: set[str] = set()
    for row in nfa.edges:
        for cs, _ in row:
            explicit |= cs.chars
    atoms: list = sorted(explicit) + [OTHER]

    # Subset construction.
    start_set = nfa.closure(frozenset({start}))
    index: dict[frozenset[int], int] = {start_set: 0}
    table: list[dict] = [{}]
    sets = [start_set]
    work = [start_set]
    while work:
        current = work.pop()
        ci = index[current]
        for atom in atoms:
            moved = set()
            for s in current:
                for cs, t in nfa.edges[s]:
                    if cs.matches_atom(atom):
                        moved.add(t)
            nxt = nfa.closure(frozenset(moved))
            if nxt not in index:
                index[nxt] = len(sets)
                sets.append(nxt)
                table.append({})
                work.append(nxt)
            table[ci][atom] = index[nxt]
    accepting = frozenset(i for i, st in enumerate(sets) if accept in st)

    table, accepting, start_id = _minimize(table, accepting, atoms, 0)
    return RegexDfa(pattern, frozenset(explicit), table, accepting, start_id)


def _minimize(
    table: list[dict], accepting: frozenset[int], atoms: list, start: int
) -> tuple[list[dict], frozenset[int], int]:
    """Moore partition refinement to the coarsest stable partition."""
    n = len(table)
    cls = [1 if i in accepting else 0 for i in range(n)]
    while True:
        signatures: dict[tuple, int] = {}
        new_cls = [0] * n
        for i in range(n):
            sig = (cls[i],) + tuple(cls[table[i][a]] for a in atoms)
            if sig not in signatures:
                signatures[sig] = len(signatures)
            new_cls[i] = signatures[sig]
        if new_cls == cls:
            break
        cls = new_cls

    n_classes = max(cls) + 1
    new_table: list[dict] = [{} for _ in range(n_classes)]
    for i in range(n):
        c = cls[i]
        if new_table[c]:
            continue
        for a in atoms:
            new_table[c][a] = cls[table[i][a]]
    new_accepting = frozenset(cls[i] for i in accepting)
    return new_table, new_accepting, cls[start]


def product_intersection_empty(a: RegexDfa, b: RegexDfa) -> tuple[bool, str | None]:
    """Decide whether any string is accepted by both DFAs.

    Returns ``(empty, witness)`` where the witness is a shortest common
    string when the intersection is non-empty.
    """
    union = sorted(a.explicit | b.explicit)
    probe = _fresh_char(set(union))
    symbols = union + [probe]

    start = (a.start, b.start)
    if a.is_accepting(a.start) and b.is_accepting(b.start):
        return False, ""
    seen = {start}
    frontier: list[tuple[tuple[int, int], str]] = [(start, "")]
    while frontier:
        nxt_frontier = []
        for (sa, sb), path in frontier:
            for ch in symbols:
                pair = (a.total_step(sa, ch), b.total_step(sb, ch))
                if pair in seen:
                    continue
                seen.add(pair)
                word = path + ch
                if a.is_accepting(pair[0]) and b.is_accepting(pair[1]):
                    return False, word
                nxt_frontier.append((pair, word))
        frontier = nxt_frontier
    return True, None


def _fresh_char(used: set[str]) -> str:
    for code in range(0x21, 0x110000):
        ch = chr(code)
        if ch not in used:
            return ch
    raise RegexSupportError("no fresh character available for product probing")
