"""A long thin neck: the Dirichlet problem on [ln eps, -ln eps] bounds the
first coexact eigenvalue, which goes to zero like (pi / 2 ln(1/eps))^2."""
import math

from coexact.models.cusp import CuspModel, cusp_eigenvalue

print(f"{'eps':>10} {'finite diff':>14} {'analytic':>14} {'rel.err':>10}")
for k in (1, 2, 5, 10, 20, 40):
    res = cusp_eigenvalue(CuspModel(math.exp(-k), 2048))
    print(f"{'e^-' + str(k):>10} {res.finite_difference:14.8f} {res.analytic:14.8f} {res.relative_error:10.2e}")

errs = [cusp_eigenvalue(CuspModel(math.exp(-3), n)).relative_error for n in (64, 128, 256, 512)]
print("error ratios under halving h:", [round(a / b, 2) for a, b in zip(errs, errs[1:])])
