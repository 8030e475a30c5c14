"""Compile a target unitary into MZI phases, check it, and save the mesh as JSON."""
import numpy as np

from qdpic.circuit import compile_unitary, dft_unitary, input_phase_residual, mesh_to_unitary, mzi_unitary

# One MZI: theta = pi is the bar state, 0 the cross state, pi/2 a balanced splitter.
for name, theta in (("bar", np.pi), ("cross", 0.0), ("50:50", np.pi / 2)):
    print(name, np.round(np.abs(mzi_unitary(theta, 0.0)) ** 2, 3).tolist())

# The 4-mode DFT on a rectangular mesh: 6 MZIs in 4 layers plus output phases
target = dft_unitary(4)
mesh = compile_unitary(target)
print(f"{len(mesh.cells)} cells, {mesh.num_layers} layers")
for c in mesh.cells:
    print(f"  layer {c.layer} modes ({c.top_mode},{c.top_mode + 1}) theta={c.theta:.4f} phi={c.phi:.4f}")

u = mesh_to_unitary(mesh)
print("max |U_mesh - U_target| =", np.max(np.abs(u - target)))
print("residual up to input phases =", input_phase_residual(u, target))

with open("dft4_mesh.json", "w") as fh:
    fh.write(mesh.to_json())
print("wrote dft4_mesh.json (usable as circuit.mesh_file in a run config)")
