"""Legacy ASCII VTK export of tetrahedral meshes with per-element data."""

import numpy as np

VTK_TET = 10


def export_vtk(mesh, fields, path, title="curlamr mesh"):
    """Write an unstructured-grid legacy VTK file.

    fields maps array names to per-element (cell) scalar arrays; every
    array must match the element count.  An empty mapping produces a
    geometry-only file.
    """
    fields = dict(fields or {})
    for name, arr in fields.items():
        arr = np.asarray(arr)
        if arr.shape != (mesh.num_tets,):
            raise ValueError(f"cell array {name!r} has shape {arr.shape}, "
                             f"expected ({mesh.num_tets},)")
        fields[name] = arr

    lines = ["# vtk DataFile Version 2.0", title, "ASCII",
             "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.num_vertices} double"]
    for p in mesh.vertices:
        lines.append(f"{p[0]!r} {p[1]!r} {p[2]!r}")
    lines.append(f"CELLS {mesh.num_tets} {5 * mesh.num_tets}")
    for t in mesh.tets:
        lines.append(f"4 {t[0]} {t[1]} {t[2]} {t[3]}")
    lines.append(f"CELL_TYPES {mesh.num_tets}")
    lines.extend([str(VTK_TET)] * mesh.num_tets)
    if fields:
        lines.append(f"CELL_DATA {mesh.num_tets}")
        for name, arr in fields.items():
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(repr(float(v)) for v in arr)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
