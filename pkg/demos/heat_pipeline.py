"""Heat equation and 2t d/dx - x u d/du, end to end.

The field is an exact symmetry with multiplier -x but does not leave the
equation invariant.  Its canonical chart reduces the equation to a first
order ODE whose solution lifts to the heat kernel.
"""

import sympy as sp

from condsym import (
    Context,
    apply,
    classify,
    derive_chart,
    extract_factored_form,
    lift_invariant_solution,
    parse,
    parse_field,
    prolong,
    reduced_system,
    to_text,
    transform_equation,
    verify_chart,
    verify_solution,
)

ctx = Context(("x", "t"), ("u",))
delta = parse("u_t - u_xx", ctx)
X = parse_field("2*t*d/dx - x*u*d/du", ctx)

print("pr X (Delta) =", to_text(apply(prolong(X, 2), delta)))
rep = classify(X, delta)
print("verdict:", rep.label(), "| multiplier G =", to_text(rep.witnesses["G"][0][0]))

chart = derive_chart(X)
print("\nchart:\n" + chart.to_text())
print("chart verifies:", verify_chart(X, chart).passed)

tr = transform_equation(delta, chart)
print("\ntransformed:", to_text(tr.expr), " (cleared factor", to_text(tr.factor) + ")")
ff = extract_factored_form(tr.expr, chart)
rs = reduced_system(ff)
print("reduced:", rs.lines())

z = rs.ctx.x[0]
w = z ** sp.Rational(-1, 2)
u = lift_invariant_solution(chart, w)
print("\nw = z^(-1/2) lifts to u =", to_text(u))
print("solves the heat equation:", verify_solution(delta, u, ctx))
