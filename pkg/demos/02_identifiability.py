"""Two hierarchies on different trees with the same document law.

A single triangle of topics and the same triangle split in two along a
segment from one corner give identical laws of the document mean when
alpha = 1 and the path weights equal the areas.  Exact enumeration of the
document distribution shows this, and shows that moving the splitting
topic off the plane of the others breaks the tie.
"""
from treetopic.geometry import check_a1, check_b1
from treetopic.model import split_triangle_pair, tv_kl_exact

omega, omega2 = split_triangle_pair()
for n in (2, 3, 4):
    tv, kl = tv_kl_exact(omega, omega2, n)
    print(f"n={n}: TV={tv:.2e} KL={kl:.2e}")
print("split model: components non-degenerate", check_a1(omega2.hierarchy), "separated", check_b1(omega2.hierarchy))

pa, pb = split_triangle_pair(perturb=0.05)
for n in (2, 4, 6):
    tv, kl = tv_kl_exact(pa, pb, n)
    print(f"perturbed n={n}: TV={tv:.4f} KL={kl:.4f}")
print("perturbed split model separated:", check_b1(pb.hierarchy))
