"""Two photons in a 4-mode DFT: which outputs vanish, and how distinguishability refills them."""
from qdpic.circuit import dft_unitary
from qdpic.experiments import simulate_suppression_counts
from qdpic.interference import GramMatrix, Suppression, full_distribution, suppression_predicate

u = dft_unitary(4)

# Cyclic input (1,3): outputs with an odd mode sum are forbidden for identical photons
for v in (1.0, 0.943, 0.0):
    dist = full_distribution(u, (1, 3), GramMatrix.uniform(2, v), collision_free=True, renormalize=True)
    row = "  ".join(f"{c.label}:{p:.4f}" for c, p in dist.items())
    print(f"V={v:<5}  {row}")

# The predicate only speaks for cyclic inputs
for inp in ((1, 2), (1, 3), (2, 4)):
    verdicts = {c.label: suppression_predicate(inp, c, 4).value for c in full_distribution(u, inp, collision_free=True)}
    print(inp, verdicts)

# Monte Carlo with four threshold detectors: the suppressed share tracks the model
gram = GramMatrix.uniform(2, 0.943)
counts = simulate_suppression_counts(u, (1, 3), gram, 100_000, seed=1)
f, err = counts.suppressed_fraction()
print(f"suppressed share {f:.4f} +- {err:.4f}, predicted {counts.predicted_suppressed_fraction():.4f}")
for pair, n in counts.pair_counts.items():
    flag = "suppressed" if suppression_predicate((1, 3), pair, 4) is Suppression.SUPPRESSED else ""
    print(f"  detectors {pair}: {n:6d} {flag}")
