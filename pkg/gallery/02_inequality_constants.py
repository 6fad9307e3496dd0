"""
Empirical constants for the anisotropic trilinear inequalities.

For every r in the sweep, the ratio |int f g h| / (product of factor norms)
is evaluated on a seeded family of compactly supported bump triples. The
largest ratio is a lower bound for the best constant. Refining the grid
from n=32 to n=64 shows the estimate is resolved.
"""
from hessnse import BumpFamily, make_grid
from hessnse.inequalities import sweep_constants

R_VALUES = (1.25, 1.5, 2.0, 2.5, 3.0)
family = BumpFamily(40, seed=0)

for lemma in ("2.2", "2.3"):
    coarse = sweep_constants(lemma, R_VALUES, family, make_grid(32, 0.1))
    fine = sweep_constants(lemma, R_VALUES, family, make_grid(64, 0.1))
    print(f"lemma {lemma}")
    print(f"{'r':>6}{'sup n=32':>12}{'sup n=64':>12}{'argmax':>8}")
    for r in R_VALUES:
        print(f"{r:>6}{coarse[r].sup_ratio:>12.6f}{fine[r].sup_ratio:>12.6f}{coarse[r].argmax:>8}")
