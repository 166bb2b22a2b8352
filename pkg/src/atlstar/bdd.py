"""Reduced ordered binary decision diagrams with hash consing.

A :class:`BddStore` owns a global variable order organised into named
blocks (e.g. current/next state bits, per-agent action bits).  Functions
are canonical: two handles in the same store are equal iff they denote
the same Boolean function.  The store is single-threaded; handles must
not be mixed across stores.
"""

from __future__ import annotations

from dataclasses import dataclass


class BddError(Exception):
    pass


class BudgetExceeded(BddError):
    """Raised when the node table outgrows the configured byte budget."""


# approximate cost of one node (table entry + unique-table slot)
_BYTES_PER_NODE = 96

FALSE = 0
TRUE = 1

_OPS = ("and", "or", "xor", "implies", "iff", "not", "ite")


@dataclass(frozen=True)
class VarBlock:
    """A named, ordered group of variables in one store."""

    name: str
    vars: tuple  # global variable indices, ascending

    def __len__(self):
        return len(self.vars)


class Bdd:
    """Handle to a canonical Boolean function in a store."""

    __slots__ = ("store", "node")

    def __init__(self, store, node):
        self.store = store
        self.node = node

    def __eq__(self, other):
        return (
            isinstance(other, Bdd)
            and self.store is other.store
            and self.node == other.node
        )

    def __hash__(self):
        return hash((id(self.store), self.node))

    def __and__(self, other):
        return self.store.apply("and", self, other)

    def __or__(self, other):
        return self.store.apply("or", self, other)

    def __xor__(self, other):
        return self.store.apply("xor", self, other)

    def __invert__(self):
        return self.store.apply("not", self)

    def is_false(self):
        return self.node == FALSE

    def is_true(self):
        return self.node == TRUE

    def __repr__(self):
        return f"Bdd(node={self.node})"


class BddStore:
    """Shared node table with an operation cache.

    ``blocks`` is a list of ``(name, width)`` pairs.  A block whose name is
    a previous block's name plus a trailing apostrophe (e.g. ``q`` and
    ``q'``) is its primed partner; partner blocks of equal width are
    interleaved bitwise in the variable order, which keeps transition
    relations small.
    """

    def __init__(self, blocks, byte_budget=256 * 1024 * 1024):
        if not blocks:
            raise BddError("a store needs at least one variable block")
        names = [name for name, _ in blocks]
        if len(set(names)) != len(names):
            raise BddError("duplicate block names: %s" % names)
        for name, width in blocks:
            if width < 1:
                raise BddError(f"block {name!r} must have width >= 1")

        self.max_nodes = max(1024, byte_budget // _BYTES_PER_NODE)
        self.blocks = {}
        order = []  # list of (block name, bit index) in variable order
        i = 0
        while i < len(blocks):
            name, width = blocks[i]
            partner = None
            if i + 1 < len(blocks):
                nname, nwidth = blocks[i + 1]
                if nname == name + "'" and nwidth == width:
                    partner = nname
            if partner is not None:
                for b in range(width):
                    order.append((name, b))
                    order.append((partner, b))
                i += 2
            else:
                for b in range(width):
                    order.append((name, b))
                i += 1

        per_block = {}
        self.var_names = []
        for pos, (name, b) in enumerate(order):
            per_block.setdefault(name, []).append(pos)
            self.var_names.append(f"{name}{b}")
        for name, _ in blocks:
            self.blocks[name] = VarBlock(name, tuple(per_block[name]))
        self.nvars = len(order)

        # node 0 = false, node 1 = true; terminals get an out-of-range level
        self._var = [self.nvars, self.nvars]
        self._lo = [0, 1]
        self._hi = [0, 1]
        self._unique = {}
        self._ite_cache = {}

    # -- node layer -------------------------------------------------------

    def _mk(self, var, lo, hi):
        if lo == hi:
            return lo
        key = (var, lo, hi)
        n = self._unique.get(key)
        if n is None:
            n = len(self._var)
            if n >= self.max_nodes:
                raise BudgetExceeded(
                    f"BDD node budget exceeded ({self.max_nodes} nodes)"
                )
            self._var.append(var)
            self._lo.append(lo)
            self._hi.append(hi)
            self._unique[key] = n
        return n

    def _ite(self, f, g, h):
        if f == TRUE:
            return g
        if f == FALSE:
            return h
        if g == h:
            return g
        if g == TRUE and h == FALSE:
            return f
        key = (f, g, h)
        r = self._ite_cache.get(key)
        if r is not None:
            return r
        var_, lo_, hi_ = self._var, self._lo, self._hi
        v = min(var_[f], var_[g], var_[h])
        f1, f0 = (hi_[f], lo_[f]) if var_[f] == v else (f, f)
        g1, g0 = (hi_[g], lo_[g]) if var_[g] == v else (g, g)
        h1, h0 = (hi_[h], lo_[h]) if var_[h] == v else (h, h)
        r = self._mk(v, self._ite(f0, g0, h0), self._ite(f1, g1, h1))
        self._ite_cache[key] = r
        return r

    def _not(self, f):
        return self._ite(f, FALSE, TRUE)

    def _and(self, f, g):
        return self._ite(f, g, FALSE)

    def _or(self, f, g):
        return self._ite(f, TRUE, g)

    # -- public constructors ---------------------------------------------

    @property
    def true(self):
        return Bdd(self, TRUE)

    @property
    def false(self):
        return Bdd(self, FALSE)

    def block(self, name):
        return self.blocks[name]

    def var(self, index):
        """Function of the single variable at global order position ``index``."""
        if not 0 <= index < self.nvars:
            raise BddError(f"variable index {index} out of range")
        return Bdd(self, self._mk(index, FALSE, TRUE))

    def block_var(self, name, bit):
        return self.var(self.blocks[name].vars[bit])

    def _check(self, *fs):
        for f in fs:
            if not isinstance(f, Bdd):
                raise BddError(f"expected a Bdd, got {type(f).__name__}")
            if f.store is not self:
                raise BddError("operands belong to different stores")
        return [f.node for f in fs]

    # -- boolean operations ----------------------------------------------

    def apply(self, op, f, g=None, h=None):
        if op not in _OPS:
            raise BddError(f"unknown operation {op!r}")
        if op == "not":
            (a,) = self._check(f)
            return Bdd(self, self._not(a))
        if op == "ite":
            a, b, c = self._check(f, g, h)
            return Bdd(self, self._ite(a, b, c))
        a, b = self._check(f, g)
        if op == "and":
            r = self._ite(a, b, FALSE)
        elif op == "or":
            r = self._ite(a, TRUE, b)
        elif op == "xor":
            r = self._ite(a, self._not(b), b)
        elif op == "implies":
            r = self._ite(a, b, TRUE)
        else:  # iff
            r = self._ite(a, b, self._not(b))
        return Bdd(self, r)

    def big_or(self, fs):
        """Balanced disjunction; much flatter than a left fold for cube lists."""
        nodes = [self._check(f)[0] for f in fs]
        if not nodes:
            return self.false
        while len(nodes) > 1:
            nxt = []
            for i in range(0, len(nodes) - 1, 2):
                nxt.append(self._or(nodes[i], nodes[i + 1]))
            if len(nodes) % 2:
                nxt.append(nodes[-1])
            nodes = nxt
        return Bdd(self, nodes[0])

    def big_and(self, fs):
        nodes = [self._check(f)[0] for f in fs]
        if not nodes:
            return self.true
        while len(nodes) > 1:
            nxt = []
            for i in range(0, len(nodes) - 1, 2):
                nxt.append(self._and(nodes[i], nodes[i + 1]))
            if len(nodes) % 2:
                nxt.append(nodes[-1])
            nodes = nxt
        return Bdd(self, nodes[0])

    # -- quantification ---------------------------------------------------

    def _vars_of(self, vars_):
        if isinstance(vars_, VarBlock):
            return frozenset(vars_.vars)
        out = set()
        for v in vars_:
            if isinstance(v, VarBlock):
                out.update(v.vars)
            else:
                out.add(v)
        return frozenset(out)

    def quantify(self, kind, vars_, f):
        if kind not in ("exists", "forall"):
            raise BddError(f"unknown quantifier {kind!r}")
        (a,) = self._check(f)
        vs = self._vars_of(vars_)
        for v in vs:
            if not 0 <= v < self.nvars:
                raise BddError(f"variable {v} not in store")
        if kind == "forall":
            return Bdd(self, self._not(self._exists(self._not(a), vs, {})))
        return Bdd(self, self._exists(a, vs, {}))

    def exists(self, vars_, f):
        return self.quantify("exists", vars_, f)

    def forall(self, vars_, f):
        return self.quantify("forall", vars_, f)

    def _exists(self, n, vs, memo):
        if n <= 1:
            return n
        v = self._var[n]
        if vs and v > max(vs):
            return n
        r = memo.get(n)
        if r is not None:
            return r
        lo = self._exists(self._lo[n], vs, memo)
        hi = self._exists(self._hi[n], vs, memo)
        if v in vs:
            r = self._or(lo, hi)
        else:
            r = self._mk(v, lo, hi)
        memo[n] = r
        return r

    def and_exists(self, f, g, vars_):
        """exists vars_. (f & g) without building the full conjunction."""
        a, b = self._check(f, g)
        vs = self._vars_of(vars_)
        return Bdd(self, self._and_exists(a, b, vs, {}))

    def _and_exists(self, a, b, vs, memo):
        if a == FALSE or b == FALSE:
            return FALSE
        if a == TRUE and b == TRUE:
            return TRUE
        if a == TRUE:
            return self._exists(b, vs, memo.setdefault("e", {}))
        if b == TRUE:
            return self._exists(a, vs, memo.setdefault("e", {}))
        key = (a, b) if a <= b else (b, a)
        pair_memo = memo.setdefault("p", {})
        r = pair_memo.get(key)
        if r is not None:
            return r
        var_, lo_, hi_ = self._var, self._lo, self._hi
        v = min(var_[a], var_[b])
        a1, a0 = (hi_[a], lo_[a]) if var_[a] == v else (a, a)
        b1, b0 = (hi_[b], lo_[b]) if var_[b] == v else (b, b)
        lo = self._and_exists(a0, b0, vs, memo)
        if v in vs and lo == TRUE:
            r = TRUE
        else:
            hi = self._and_exists(a1, b1, vs, memo)
            if v in vs:
                r = self._or(lo, hi)
            else:
                r = self._mk(v, lo, hi)
        pair_memo[key] = r
        return r

    # -- substitution -----------------------------------------------------

    def compose(self, f, substitution):
        """Simultaneous functional substitution var -> Bdd."""
        (a,) = self._check(f)
        sub = {}
        for v, g in substitution.items():
            if not 0 <= v < self.nvars:
                raise BddError(f"substitution key {v} not in store")
            (gn,) = self._check(g)
            sub[v] = gn
        if not sub:
            return f
        return Bdd(self, self._compose(a, sub, {}))

    def _compose(self, n, sub, memo):
        if n <= 1:
            return n
        r = memo.get(n)
        if r is not None:
            return r
        v = self._var[n]
        lo = self._compose(self._lo[n], sub, memo)
        hi = self._compose(self._hi[n], sub, memo)
        g = sub.get(v)
        if g is None:
            g = self._mk(v, FALSE, TRUE)
        r = self._ite(g, hi, lo)
        memo[n] = r
        return r

    def rename(self, f, from_block, to_block):
        """Swap the paired variables of two equal-width blocks.

        Both directions are exchanged, so a double rename is the identity.
        """
        if len(from_block.vars) != len(to_block.vars):
            raise BddError(
                f"block length mismatch: {from_block.name} has "
                f"{len(from_block.vars)} vars, {to_block.name} has "
                f"{len(to_block.vars)}"
            )
        sub = {}
        for a, b in zip(from_block.vars, to_block.vars):
            sub[a] = self.var(b)
            sub[b] = self.var(a)
        return self.compose(f, sub)

    # -- evaluation / counting -------------------------------------------

    def support(self, f):
        (a,) = self._check(f)
        out = set()
        seen = set()
        stack = [a]
        while stack:
            n = stack.pop()
            if n <= 1 or n in seen:
                continue
            seen.add(n)
            out.add(self._var[n])
            stack.append(self._lo[n])
            stack.append(self._hi[n])
        return out

    def evaluate(self, f, assignment):
        """Evaluate under a total assignment: dict var index -> bool."""
        (n,) = self._check(f)
        while n > 1:
            n = self._hi[n] if assignment.get(self._var[n], False) else self._lo[n]
        return n == TRUE

    def sat_count(self, f, over):
        vs = sorted(self._vars_of(over))
        extra = self.support(f) - set(vs)
        if extra:
            names = [self.var_names[v] for v in sorted(extra)]
            raise BddError(f"free variables outside counting block: {names}")
        (root,) = self._check(f)
        idx = {v: i for i, v in enumerate(vs)}
        nvs = len(vs)
        memo = {}

        def go(n):
            # assignments to block vars at positions >= idx of n's var
            if n == TRUE:
                return 1, nvs
            if n == FALSE:
                return 0, nvs
            r = memo.get(n)
            if r is not None:
                return r
            i = idx[self._var[n]]
            clo, ilo = go(self._lo[n])
            chi, ihi = go(self._hi[n])
            c = clo * (1 << (ilo - i - 1)) + chi * (1 << (ihi - i - 1))
            memo[n] = (c, i)
            return c, i

        c, i = go(root)
        return c * (1 << i)

    def cube(self, block, value):
        """Conjunction encoding ``value`` in the bits of ``block`` (bit 0 = LSB)."""
        if value < 0 or value >= (1 << len(block.vars)):
            raise BddError(f"value {value} does not fit in block {block.name}")
        n = TRUE
        for b in range(len(block.vars) - 1, -1, -1):
            v = block.vars[b]
            lit = self._mk(v, FALSE, TRUE)
            if not (value >> b) & 1:
                lit = self._not(lit)
            n = self._and(n, lit)
        return Bdd(self, n)

    def minterms(self, f, block):
        """Yield the integer values over ``block`` satisfying f (ascending)."""
        (root,) = self._check(f)
        extra = self.support(f) - set(block.vars)
        if extra:
            raise BddError("minterms: function depends on vars outside block")
        out = []
        # block vars must be visited in global order for descent to work
        order = sorted(range(len(block.vars)), key=lambda i: block.vars[i])

        def go2(n, oi, acc):
            if n == FALSE:
                return
            if oi == len(order):
                out.append(acc)
                return
            i = order[oi]
            v = block.vars[i]
            if n > 1 and self._var[n] == v:
                go2(self._lo[n], oi + 1, acc)
                go2(self._hi[n], oi + 1, acc | (1 << i))
            else:
                go2(n, oi + 1, acc)
                go2(n, oi + 1, acc | (1 << i))

        go2(root, 0, 0)
        out.sort()
        return out

    # -- diagnostics ------------------------------------------------------

    def audit_reduced(self):
        """Structural check: no redundant nodes, strictly ascending vars."""
        for n in range(2, len(self._var)):
            if self._lo[n] == self._hi[n]:
                raise BddError(f"node {n} has identical children")
            for child in (self._lo[n], self._hi[n]):
                if child > 1 and self._var[child] <= self._var[n]:
                    raise BddError(f"node {n} violates variable order")
        return True

    def node_count(self):
        return len(self._var)

    def to_dot(self, f, name="bdd"):
        (root,) = self._check(f)
        lines = [f"digraph {name} {{"]
        lines.append('  node0 [label="0", shape=box];')
        lines.append('  node1 [label="1", shape=box];')
        seen = set()
        stack = [root]
        while stack:
            n = stack.pop()
            if n <= 1 or n in seen:
                continue
            seen.add(n)
            lines.append(f'  node{n} [label="{self.var_names[self._var[n]]}"];')
            lines.append(f"  node{n} -> node{self._lo[n]} [style=dashed];")
            lines.append(f"  node{n} -> node{self._hi[n]};")
            stack.append(self._lo[n])
            stack.append(self._hi[n])
        lines.append("}")
        return "\n".join(lines)


def new_store(blocks, byte_budget=256 * 1024 * 1024):
    """Create a store with the interleaved default ordering."""
    return BddStore(blocks, byte_budget=byte_budget)
