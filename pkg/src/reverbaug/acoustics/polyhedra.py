"""Image sources for convex polyhedra (Borish's recursion with validity and visibility tests)."""
import numpy as np

_EPS = 1e-9


def _inside_polygon(q, verts, normal, tol):
    edges = np.roll(verts, -1, axis=0) - verts
    cr = np.cross(edges, q[None, :] - verts) @ normal
    return bool(np.all(cr >= -tol) or np.all(cr <= tol))


def polyhedron_images(room, src, rcv, max_order, beta):
    """Enumerate visible image sources up to ``max_order`` reflections.

    Returns ``(positions, orders, gains)`` where ``gains`` is the product of
    the per-face pressure reflection factors ``beta`` along each path.
    """
    normals, offsets = room.normals, room.offsets
    faces = [np.asarray(f) for f in room.faces]
    scale = max(float(np.ptp(np.vstack(faces), axis=0).max()), 1.0)
    tol = 1e-9 * scale
    src = np.asarray(src, dtype=np.float64)
    rcv = np.asarray(rcv, dtype=np.float64)

    # node: (position, parent index, face, order, gain)
    nodes = [(src, -1, -1, 0, 1.0)]
    frontier = [0]
    for order in range(1, max_order + 1):
        nxt = []
        for ni in frontier:
            pos, _, last, _, gain = nodes[ni]
            for f in range(len(faces)):
                if f == last:
                    continue
                dist = offsets[f] - normals[f] @ pos
                if dist <= _EPS * scale:
                    continue  # image behind the face: invalid
                child = pos + 2.0 * dist * normals[f]
                nodes.append((child, ni, f, order, gain * beta[f]))
                nxt.append(len(nodes) - 1)
        frontier = nxt

    pos_out, ord_out, gain_out = [], [], []
    for i, (pos, parent, face, order, gain) in enumerate(nodes):
        if order == 0 or _visible(nodes, i, rcv, normals, offsets, faces, tol):
            pos_out.append(pos)
            ord_out.append(order)
            gain_out.append(gain)
    return np.array(pos_out), np.array(ord_out, dtype=np.int64), np.array(gain_out)


def _visible(nodes, i, rcv, normals, offsets, faces, tol):
    point = rcv
    while True:
        pos, parent, face, order, _ = nodes[i]
        if order == 0:
            return True
        seg = pos - point
        den = normals[face] @ seg
        if abs(den) < 1e-15:
            return False
        t = (offsets[face] - normals[face] @ point) / den
        if not (-1e-12 < t < 1.0 + 1e-12):
            return False
        q = point + t * seg
        if not _inside_polygon(q, faces[face], normals[face], tol):
            return False
        point = q
        i = parent
