"""A true conditional symmetry of u_tt = u u_xx seen through two charts.

Rescaling the field changes the canonical chart and the transformed
equation, yet the reduced ODE is the same.
"""

from condsym import (
    Context,
    check_true_cs,
    classify,
    extract_factored_form,
    parse,
    parse_chart,
    parse_field,
    reduced_system,
    to_text,
    transform_equation,
)

ctx = Context(("x", "t"), ("u",))
delta = parse("u_tt - u*u_xx", ctx)

fields = {
    "X": ("2*t*d/dx + d/dt + 8*t*d/du", "s = t\nz = x - t^2\nv = u - 4*t^2\ninverse:\nx = z + s^2\nt = s\nu = v + 4*s^2"),
    "X/(2t)": (
        "d/dx + 1/(2*t)*d/dt + 4*d/du",
        "s = x\nz = x - t^2\nv = u - 4*t^2\ninverse:\nx = s\nt = (s - z)^(1/2)\nu = v + 4*(s - z)",
    ),
}

for name, (ftext, ctext) in fields.items():
    X = parse_field(ftext, ctx)
    chart = parse_chart(ctext, ctx)
    print(f"--- {name} = {ftext}")
    print("classify:", classify(X, delta).label(), "| true CS:", check_true_cs(X, delta, chart=chart).verdict)
    tr = transform_equation(delta, chart)
    print("transformed:", to_text(tr.expr))
    print("reduced:", reduced_system(extract_factored_form(tr.expr, chart)).lines())
