"""Walk through the DC network tableau: stamps, assembly, and a first solve.

The network equations keep nodal voltages U, port voltages u and port
currents i explicit.  Every two-port element contributes its own pair of
equations, and the connection status of a line enters those equations
through a binary gamma, which is what later makes switching actions cheap
to represent.
"""

import io

import numpy as np

from hvdcopf import (
    assemble_tableau,
    dump_tableau,
    load_builtin_case,
    solve_tableau,
    stamp_dc_line,
)

grid = load_builtin_case()
print(f"grid: {grid.name}")
print(f"  {len(grid.dc_nodes)} DC nodes, {len(grid.dc_lines)} conductors, "
      f"{len(grid.converter_stations)} converter stations\n")

# --- element stamps ---------------------------------------------------------
line = grid.line("LD-8")  # A1p-B1p pole conductor
for gamma in (1, 0):
    s = stamp_dc_line(line, gamma)
    print(f"LD-8 stamp with gamma={gamma}:")
    print(f"  F_u = {s.f_u.tolist()}  F_i = {s.f_i.tolist()}")
print("gamma=0 forces both port currents to zero; gamma=1 gives the series-resistance law.\n")

# --- assemble and inspect ---------------------------------------------------
tab = assemble_tableau(grid)
print(f"tableau: {tab.n_nodes} nodes x {tab.n_ports} ports "
      f"(includes one grounding resistor per grounded neutral and the earth reference)")
buf = io.StringIO()
dump_tableau(tab, buf)
print("dump preview:")
print("\n".join(buf.getvalue().splitlines()[:4]), "\n...\n")

# --- a pure network solve ---------------------------------------------------
# Push 1 pu of return current into A1's neutral bus and pull it at B1's:
# the voltage rise along the metallic-return mesh is the neutral offset
# phenomenon the switching studies care about.
sol = solve_tableau(tab, {"A1m": 1.0, "B1m": -1.0})
for node in ("A1m", "B1m", "C2m", "D1m"):
    u = sol.voltage(tab, node)
    print(f"U({node}) = {u:+.5f} pu = {u * 400:+.2f} kV")
i7 = sol.port_current(tab, "LD-7", "i")
i9 = sol.port_current(tab, "LD-9", "i")
print(f"return current split over the duplicate A1-B1 conductors: {i7:+.3f} / {i9:+.3f} pu")

residual = np.max(np.abs(sol.port_u - tab.incidence.T @ sol.nodal_u))
print(f"connection-equation residual: {residual:.1e}")
