"""Independent numerical oracles: plain linear algebra on explicit networks."""
import numpy as np

from wsftol.network import WIRED, FiniteNetwork, parse_path, path_str, truncate_wired


def _path(u):
    return parse_path(u)


def dirichlet(net, fixed):
    """Harmonic extension of boundary values ``fixed`` (vertex -> value)."""
    idx = net.vertex_index()
    n = len(net.vertices)
    Lap = np.zeros((n, n))
    for e in net.edges:
        i, j = idx[e.tail], idx[e.head]
        Lap[i, i] += e.conductance
        Lap[j, j] += e.conductance
        Lap[i, j] -= e.conductance
        Lap[j, i] -= e.conductance
    b_idx = [idx[v] for v in fixed]
    free = [i for i in range(n) if i not in set(b_idx)]
    vals = np.array(list(fixed.values()), dtype=float)
    sol = np.linalg.solve(Lap[np.ix_(free, free)], -Lap[np.ix_(free, b_idx)] @ vals)
    out = dict(zip(fixed, vals))
    out.update({net.vertices[i]: s for i, s in zip(free, sol)})
    return out


def without_edge(net, edge_id):
    return FiniteNetwork(net.vertices, tuple(e for e in net.edges if e.id != edge_id))


def level_chain_from_network(net):
    """Collapse a tree truncation by level: total conductance between consecutive levels."""
    depth = max(len(v.split(".")) if v else 0 for v in net.vertices if v != WIRED)
    cond = np.zeros(depth + 2)  # cond[k]: between level k-1 and k; cond[depth+1]: to the wired vertex
    for e in net.edges:
        if e.head == WIRED:
            cond[depth + 1] += e.conductance
        else:
            cond[len(e.head.split("."))] += e.conductance
    return cond[1:]


def level_chain(profile, depth):
    """Same chain built straight from (b_n, r_n) and the rule's closure at ``depth``."""
    tail, _ = profile.rule.tail(depth, profile.size(depth))
    cond = [profile.size(k) / profile.r(k) for k in range(1, depth + 1)]
    return np.array(cond + [1.0 / tail])


def chain_hit_root(cond):
    """First-step analysis: h_0 = 1, absorbing wired end at 0."""
    M = len(cond) - 1  # levels 1..M are free
    A = np.zeros((M, M))
    rhs = np.zeros(M)
    for k in range(1, M + 1):
        down, up = cond[k - 1], cond[k]
        A[k - 1, k - 1] = down + up
        if k > 1:
            A[k - 1, k - 2] = -down
        else:
            rhs[0] = down
        if k < M:
            A[k - 1, k] = -up
    return np.concatenate([[1.0], np.linalg.solve(A, rhs)])


def series_parallel_alpha_pieces(profile, n, depth):
    """beta_y, up_open and escape for the edge above x = (0,)*n by Dirichlet solves.

    Works on the explicit wired truncation at ``depth`` with the edge [x, y]
    deleted, so only the root side of the edge is visible to the walk.
    """
    net = truncate_wired(profile, depth)
    x = (0,) * n
    anc = [path_str(x[:k]) for k in range(n)]
    v = dirichlet(net, {path_str(x): 1.0, WIRED: 0.0})
    beta_y = 1.0 - v[anc[-1]]
    cut = without_edge(net, "e" + path_str(x))
    # drop the now-disconnected subtree of x
    keep = [u for u in cut.vertices if u == WIRED or _path(u)[:n] != x]
    kept = set(keep)
    side = FiniteNetwork(tuple(keep), tuple(e for e in cut.edges if e.tail in kept and e.head in kept))
    up = []
    for k in range(n - 1):
        up.append(dirichlet(side, {anc[k + 1]: 1.0, WIRED: 0.0})[anc[k]])
    # split the wired vertex by which ancestor's bush the boundary edge hangs from
    free = [u for u in side.vertices if u != WIRED]
    fi = {u: i for i, u in enumerate(free)}
    Lap = np.zeros((len(free), len(free)))
    sinks = np.zeros((len(free), n))
    for e in side.edges:
        if e.head == WIRED:
            i = fi[e.tail]
            Lap[i, i] += e.conductance
            # the bush at a_k holds the leaves whose path first leaves x at index k
            path = _path(e.tail)
            k = next(k for k in range(n) if path[k] != x[k])
            sinks[i, k] += e.conductance
            continue
        i, j = fi[e.tail], fi[e.head]
        Lap[i, i] += e.conductance
        Lap[j, j] += e.conductance
        Lap[i, j] -= e.conductance
        Lap[j, i] -= e.conductance
    absorb = np.linalg.solve(Lap, sinks)
    escape = absorb[fi[anc[-1]]]
    return beta_y, up, escape


def rayperc_prob(profile, sample):
    """Exact RayPerc probability of a labeled subtree: Perc([t]) * W(t)."""
    from wsftol import potential

    p = potential.perc_open_probs(profile)
    L = potential.tail_sums(profile).values
    D = sample.depth
    counts = sample.level_counts
    perc = 1.0
    for n in range(1, D + 1):
        slots = profile.b(n) * counts[n - 1]
        perc *= p[n] ** counts[n] * (1 - p[n]) ** (slots - counts[n])
    return perc * counts[D] * L[0] / (profile.size(D) * L[D])


def component_via_edges(present_children, start, exclude=None):
    """Vertices joined to ``start`` by tree edges (child endpoints in ``present_children``)."""
    comp = {start}
    frontier = [start]
    while frontier:
        v = frontier.pop()
        nbrs = [c for c in present_children if c[:-1] == v]
        if v and v in present_children:
            nbrs.append(v[:-1])
        for u in nbrs:
            if exclude is not None and {u, v} == {exclude, exclude[:-1]}:
                continue
            if u not in comp:
                comp.add(u)
                frontier.append(u)
    return frozenset(comp)


def wired_tree_children(tree_edge_ids):
    return frozenset(parse_path(e[1:]) for e in tree_edge_ids if e.startswith("e"))
