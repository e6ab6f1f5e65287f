"""The map ``u = (lam a, lam b, lam^2 phi)`` and the doubled closed surface.

The copy of the annulus carries ``(lam a, lam b, -lam^2 phi)`` with reversed
orientation; since ``phi = 0`` on both circles the two sheets meet there and are
welded into a single closed mesh of torus type.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ORIGINAL, MIRRORED, SEAM = 0, 1, 2


class SeamGapError(ValueError):
    """The two sheets do not meet on the boundary circles within tolerance."""


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    vertices: np.ndarray  # (V, 3)
    faces: np.ndarray  # (F, 4) quads or (F, 3) triangles, 0-based
    provenance: np.ndarray  # (V,) ORIGINAL / MIRRORED / SEAM

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)


def _pair_eval(sol):
    from .equivariance import FieldPair
    from .energy import evaluate

    if isinstance(sol, FieldPair):
        return sol, evaluate(sol)
    return sol.pair, sol.eval


def assemble_map(sol, mirrored: bool = False) -> np.ndarray:
    """Node values of ``u`` (or of the mirrored sheet) with shape ``(n_r, n_theta, 3)``."""
    p, e = _pair_eval(sol)
    lam = e.lam
    s = -1.0 if mirrored else 1.0
    return np.stack([lam * p.a.values, lam * p.b.values, s * lam * lam * e.phi.values], axis=-1)


def seam_gap(sol) -> float:
    """Max distance between ``u`` and its mirror on the two boundary circles."""
    u = assemble_map(sol)
    return float(2.0 * np.abs(u[[0, -1], :, 2]).max())


def double_surface(sol, tol: float = 1e-10, triangulate: bool = False) -> SurfaceMesh:
    """Weld the sheet and its mirrored copy along both circles.

    Vertex count is ``2 * n_r * n_theta - 2 * n_theta`` (seam rows stored once).
    Refuses to weld when the seam gap exceeds ``tol * max(1, max|u|)``.
    """
    u = assemble_map(sol)
    n_r, n_t, _ = u.shape
    gap = seam_gap(sol)
    scale = max(1.0, float(np.abs(u).max()))
    if gap > tol * scale:
        raise SeamGapError(f"seam gap {gap:.3e} exceeds tolerance {tol * scale:.3e}")
    um = assemble_map(sol, mirrored=True)

    idx1 = np.arange(n_r * n_t).reshape(n_r, n_t)
    idx2 = np.empty_like(idx1)
    idx2[0], idx2[-1] = idx1[0], idx1[-1]
    idx2[1:-1] = n_r * n_t + np.arange((n_r - 2) * n_t).reshape(n_r - 2, n_t)

    verts = np.concatenate([u.reshape(-1, 3), um[1:-1].reshape(-1, 3)])
    # seam rows take the value of the original sheet (third coordinate 0 there)
    verts[idx1[0]] = u[0]
    verts[idx1[-1]] = u[-1]
    prov = np.full(len(verts), ORIGINAL, dtype=np.int8)
    prov[n_r * n_t:] = MIRRORED
    prov[idx1[0]] = SEAM
    prov[idx1[-1]] = SEAM

    i = np.arange(n_r - 1)[:, None]
    j = np.arange(n_t)[None, :]
    jp = (j + 1) % n_t

    def quads(idx, reverse):
        q = np.stack([idx[i, j], idx[i + 1, j], idx[i + 1, jp], idx[i, jp]], axis=-1).reshape(-1, 4)
        # (0, 3, 2, 1) reverses the winding but keeps the 0-2 split diagonal
        return q[:, [0, 3, 2, 1]] if reverse else q

    faces = np.concatenate([quads(idx1, False), quads(idx2, True)])
    if triangulate:
        faces = triangulate_faces(faces)
    return SurfaceMesh(verts, faces, prov)


def triangulate_faces(faces: np.ndarray) -> np.ndarray:
    if faces.shape[1] == 3:
        return faces
    return np.concatenate([faces[:, [0, 1, 2]], faces[:, [0, 2, 3]]])


# -- topology -----------------------------------------------------------------


def _edges(faces):
    for f in faces:
        k = len(f)
        for t in range(k):
            yield int(f[t]), int(f[(t + 1) % k])


def edge_face_counts(mesh: SurfaceMesh) -> Counter:
    return Counter(tuple(sorted(e)) for e in _edges(mesh.faces))


def euler_characteristic(mesh: SurfaceMesh) -> int:
    return mesh.n_vertices - len(edge_face_counts(mesh)) + mesh.n_faces


def is_closed(mesh: SurfaceMesh) -> bool:
    return all(c == 2 for c in edge_face_counts(mesh).values())


def is_consistently_oriented(mesh: SurfaceMesh) -> bool:
    """Every directed edge occurs exactly once (neighbors traverse shared edges oppositely)."""
    c = Counter(_edges(mesh.faces))
    return all(v == 1 and c.get((b, a), 0) == 1 for (a, b), v in c.items())


def signed_volume(mesh: SurfaceMesh) -> float:
    tris = triangulate_faces(mesh.faces)
    v = mesh.vertices
    return float(np.einsum("ij,ij->i", v[tris[:, 0]], np.cross(v[tris[:, 1]], v[tris[:, 2]])).sum() / 6.0)


# -- export -------------------------------------------------------------------


def _check_nonempty(mesh: SurfaceMesh):
    if mesh.n_vertices == 0 or mesh.n_faces == 0:
        raise ValueError("refusing to export an empty mesh")


def export_obj(mesh: SurfaceMesh, path) -> Path:
    """Wavefront OBJ: ``v`` lines then ``f`` lines, 1-based, 17 significant digits, LF."""
    _check_nonempty(mesh)
    path = Path(path)
    lines = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices]
    lines += ["f " + " ".join(str(int(k) + 1) for k in f) for f in mesh.faces]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")
    return path


def read_obj(path) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    """Minimal OBJ reader for ``v`` and ``f`` records; returns 0-based faces."""
    verts, faces = [], []
    with open(path, encoding="ascii") as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                verts.append([float(t) for t in parts[1:4]])
            elif parts[0] == "f":
                faces.append(tuple(int(t.split("/")[0]) - 1 for t in parts[1:]))
    return np.array(verts, dtype=float).reshape(-1, 3), faces


def export_ply(mesh: SurfaceMesh, path) -> Path:
    """Binary little-endian PLY with double vertices and int32 face lists."""
    _check_nonempty(mesh)
    path = Path(path)
    header = (
        "ply\nformat binary_little_endian 1.0\n"
        f"element vertex {mesh.n_vertices}\n"
        "property double x\nproperty double y\nproperty double z\n"
        f"element face {mesh.n_faces}\n"
        "property list uchar int vertex_indices\nend_header\n"
    )
    k = mesh.faces.shape[1]
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(mesh.vertices, dtype="<f8").tobytes())
        rec = np.zeros(mesh.n_faces, dtype=[("n", "u1"), ("idx", "<i4", (k,))])
        rec["n"] = k
        rec["idx"] = mesh.faces
        fh.write(rec.tobytes())
    return path


def read_ply(path) -> tuple[np.ndarray, np.ndarray]:
    """Reader for files written by ``export_ply`` (uniform face arity)."""
    with open(path, "rb") as fh:
        data = fh.read()
    end = data.index(b"end_header\n") + len(b"end_header\n")
    header = data[:end].decode("ascii").splitlines()
    nv = int(next(h for h in header if h.startswith("element vertex")).split()[-1])
    nf = int(next(h for h in header if h.startswith("element face")).split()[-1])
    verts = np.frombuffer(data, dtype="<f8", count=3 * nv, offset=end).reshape(nv, 3)
    off = end + 24 * nv
    k = struct.unpack_from("<B", data, off)[0] if nf else 3
    rec = np.frombuffer(data, dtype=[("n", "u1"), ("idx", "<i4", (k,))], count=nf, offset=off)
    return verts.copy(), rec["idx"].astype(int)
