"""Weak conditional symmetries: iterate the field until the chain closes.

KdV with its scaling field closes at order 2.  The Boussinesq field
t^2 d/dx + d/dt - (2x + 10t^3/3) d/du closes at order 3, and the
invariant-surface condition shortens that to 2; both orders are printed.
"""

from condsym import Context, check_partial_symmetry, classify_weak_cs, parse, parse_field, to_text
from condsym.classify import iterate_field

ctx = Context(("x", "t"), ("u",), ("c1", "c2"))
cases = [
    ("u_t + u_xxx + u*u_x", "2*x*d/dx + t*d/dt + u*d/du", ["x/t", "(x + c1)/(t + c2)"]),
    ("u_tt + u_xxxx + u*u_xx + u_x^2", "t^2*d/dx + d/dt - (2*x + 10/3*t^3)*d/du", ["-t^4/3 - 2*t*x + c1*t + c2"]),
]

for eq, ftext, families in cases:
    delta, X = parse(eq, ctx), parse_field(ftext, ctx)
    print(f"--- {eq}  with  {ftext}")
    rep = classify_weak_cs(X, delta)
    print("verdict:", rep.label(), "| sigma_with_q:", rep.witnesses.get("sigma_with_q"))
    for k, d in enumerate(iterate_field(X, delta, rep.sigma)[1:], 1):
        print(f"  Delta^({k}) = {to_text(d)}")
    part = check_partial_symmetry(X, delta, candidates=[parse(f, ctx) for f in families])
    for u, residuals, ok in part.candidates:
        print(f"  u = {to_text(u)} solves the augmented system: {ok}")
