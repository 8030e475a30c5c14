"""Multiply out a chain of optical losses."""
from qdpic.source import LossStage, loss_budget, waveguide_stage

for coupling_db in (4.25, 7.0):
    budget = loss_budget([
        LossStage("fiber-to-chip coupling", loss_db=coupling_db),
        waveguide_stage(1.0),
        LossStage("detector", efficiency=0.85),
    ])
    print(f"coupling {coupling_db} dB -> end-to-end {budget.efficiency:.4f} ({budget.loss_db:.2f} dB)")
    for label, eff in budget.stages:
        print(f"    {label:<24} {eff:.4f}")
