#!/usr/bin/env python3
"""Independent entity counter for the reusability index.

Reads scenario and library .kmf files with its own small parser and prints
`<scenario> <reused> <total>` per scenario, or JSON with --json.

Counting convention:
  state      one per named state; reused if its fact set equals a library state
  transition one per transition; reused if pre (as a set), compute and action
             (as sequences) equal those of a library transition
  functor    one per distinct functor/arity in states, preconditions and
             actions; reused if declared in the library vocabulary
  route      one per distinct ground fact whose functor the vocabulary marks
             route_vertex/route_edge; reused if some library state holds it
"""
import argparse
import json
import pathlib
import re
import sys

TOKEN = re.compile(r"\s+|#[^\n]*|->|[A-Za-z_][A-Za-z0-9_-]*|-?\d+(?:[./]\d+)?|[(){},./]")


def tokens(text):
    out = []
    pos = 0
    while pos < len(text):
        m = TOKEN.match(text, pos)
        if not m:
            raise SystemExit(f"cannot tokenize at offset {pos}: {text[pos:pos + 20]!r}")
        tok = m.group(0)
        pos = m.end()
        if tok.isspace() or tok.startswith("#"):
            continue
        out.append(tok)
    return out


class Reader:
    def __init__(self, text):
        self.toks = tokens(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, expected=None):
        tok = self.peek()
        if expected is not None and tok != expected:
            raise SystemExit(f"expected {expected!r}, found {tok!r}")
        self.i += 1
        return tok

    def term(self):
        """Returns (text, functor, arity) for a term; nested terms are flattened to text."""
        head = self.take()
        if self.peek() != "(":
            return head, head, 0
        self.take("(")
        args = [self.term()[0]]
        while self.peek() == ",":
            self.take(",")
            args.append(self.term()[0])
        self.take(")")
        return f"{head}({','.join(args)})", head, len(args)

    def block(self, item):
        self.take("{")
        items = []
        while self.peek() != "}":
            items.append(item())
            self.take(".")
        self.take("}")
        return items

    def skip_block(self):
        depth = 0
        while True:
            tok = self.take()
            if tok == "{":
                depth += 1
            elif tok == "}":
                depth -= 1
                if depth == 0:
                    return


def is_ground(text):
    return not re.search(r"(^|[(,])[A-Z_]", text)


def parse(text):
    r = Reader(text)
    states, transitions, vocab = {}, {}, {}
    while r.peek() is not None:
        kw = r.take()
        if kw in ("model", "initial", "goal"):
            r.take()
            r.take(".")
        elif kw == "state":
            name = r.take()
            states[name] = frozenset(t for t, _, _ in r.block(r.term))
        elif kw == "transition":
            name = r.take()
            body = {"pre": [], "compute": [], "action": []}
            r.take("{")
            while r.peek() != "}":
                section = r.take()
                body[section] = r.block(r.term)
            r.take("}")
            transitions[name] = body
        elif kw == "vocabulary":
            if r.peek() != "{":
                r.take()
            r.take("{")
            while r.peek() != "}":
                role = "plain"
                if r.peek() in ("route_vertex", "route_edge"):
                    role = r.take()
                functor = r.take()
                r.take("/")
                arity = int(r.take())
                r.take(".")
                vocab[(functor, arity)] = role
            r.take("}")
        else:
            if r.peek() != "{":
                r.take()
            r.skip_block()
    return states, transitions, vocab


def unwrap_action(text, functor):
    inner = text[len("add(") if text.startswith("add(") else len("delete("):-1]
    return inner


def body_key(body):
    return (
        frozenset(t for t, _, _ in body["pre"]),
        tuple(t for t, _, _ in body["compute"]),
        tuple(t for t, _, _ in body["action"]),
    )


def functors_of(states, transitions):
    out = set()
    for facts in states.values():
        for fact in facts:
            out.add(signature(fact))
    for body in transitions.values():
        for _, f, n in body["pre"]:
            out.add((f, n))
        for text, _, _ in body["action"]:
            inner = text[text.index("(") + 1:-1]
            out.add(signature(inner))
    return out


def signature(text):
    if "(" not in text:
        return text, 0
    head = text[: text.index("(")]
    depth, arity = 0, 1
    for ch in text[len(head) + 1:-1]:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            arity += 1
    return head, arity


def load_library(directory):
    states, transitions, vocab = {}, {}, {}
    for path in sorted(pathlib.Path(directory).glob("*.kmf")):
        s, t, v = parse(path.read_text())
        states.update(s)
        transitions.update(t)
        vocab.update(v)
    return states, transitions, vocab


def count(scenario_text, library):
    lib_states, lib_transitions, vocab = library
    states, transitions, _ = parse(scenario_text)
    lib_state_sets = set(lib_states.values())
    lib_bodies = {body_key(b) for b in lib_transitions.values()}
    lib_facts = set().union(*lib_states.values()) if lib_states else set()
    reused = total = 0
    for facts in states.values():
        total += 1
        reused += facts in lib_state_sets
    for body in transitions.values():
        total += 1
        reused += body_key(body) in lib_bodies
    for sig in functors_of(states, transitions):
        total += 1
        reused += sig in vocab
    route = set()
    for facts in states.values():
        for fact in facts:
            if is_ground(fact) and vocab.get(signature(fact)) in ("route_vertex", "route_edge"):
                route.add(fact)
    for fact in route:
        total += 1
        reused += fact in lib_facts
    return reused, total


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--library", required=True)
    ap.add_argument("--json", action="store_true")
    ap.add_argument("scenarios", nargs="+")
    args = ap.parse_args()
    library = load_library(args.library)
    results = {}
    for path in args.scenarios:
        name = pathlib.Path(path).stem
        results[name] = count(pathlib.Path(path).read_text(), library)
    if args.json:
        doc = {k: {"reused": r, "total": t} for k, (r, t) in sorted(results.items())}
        json.dump(doc, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        for k, (r, t) in results.items():
            print(f"{k} {r} {t}")


if __name__ == "__main__":
    main()
