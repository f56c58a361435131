"""Factorization oracle: y' = G(s, y) y has y(s) = R(s) kappa with constant kappa.

S solves S' = -S G along the computed trajectory; kappa = S y stays constant
and R = S^-1 rebuilds y.  Flipping the adjoint sign breaks both.
"""

from condsym.oracle import OdeFactorizationProblem, liouville_check, self_convergence, verify_factorization

p = OdeFactorizationProblem.from_exprs([["s", "y2"], ["0", "-s"]], y0=[1.0, 0.5], s_max=1.0)
rep = verify_factorization(p)
print("kappa drift     %.2e" % rep.kappa_residual)
print("y - R kappa     %.2e" % rep.R_residual)
print("S R - I         %.2e" % rep.SR_residual)
print("self-convergence %.2e" % self_convergence(p))
print("Liouville        %.2e" % liouville_check(p))
print("passed:", rep.passed)
bad = verify_factorization(p, sign=1.0)
print("with S' = +S G: kappa drift %.2e, passed: %s" % (bad.kappa_residual, bad.passed))
