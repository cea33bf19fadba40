"""
Finite-difference gradient checks
=================================

Every hand-written backward pass is compared against central differences.
Coordinates where a nudge flips a ReLU or changes a max-pool winner are
excluded because the derivative is not defined there.
"""

from evpose.gradcheck import Instance, grad_check

for op in ("linear", "relu", "etsc_forward", "pointwise_features", "forward"):
    r = grad_check(op, seed=0)
    print(f"{op:<19} max rel err {r.max_rel_err:.2e}  checked {r.n_checked:5d}  "
          f"excluded {r.n_excluded:3d}  {'pass' if r.passed else 'FAIL'}")

# every input sitting exactly on the ReLU kink is excluded
r = grad_check("relu", Instance(N=4, C=3), seed=0, probe={"x": 0.0})
print(f"relu at 0: checked {r.n_checked}, excluded {r.n_excluded}")
