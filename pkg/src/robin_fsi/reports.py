"""Deterministic CSV report writers: fixed 10-significant-digit float
formatting, '.' decimal separator, '\\n' line endings, so identical
inputs produce byte-identical files."""


def fmt(x):
    if x is None:
        return ""
    return f"{float(x):.10g}"


def _write_rows(path, header, rows, preamble=()):
    with open(path, "w", newline="\n") as f:
        for line in preamble:
            f.write(f"# {line}\n")
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(str(c) for c in row) + "\n")


def write_rate_table(table, path):
    header = ["level", "tau", "h", "eps", "err_eta", "err_xi", "err_u",
              "rate_eta", "rate_xi", "rate_u", "avg_subiters"]
    rates = table.rates()
    rows = []
    for i, lv in enumerate(table.levels):
        r_eta, r_xi, r_u = rates[i]
        rows.append([
            i, fmt(lv["tau"]), fmt(lv["h"]), fmt(lv["eps"]),
            fmt(lv["err_eta"]), fmt(lv["err_xi"]), fmt(lv["err_u"]),
            fmt(r_eta), fmt(r_xi), fmt(r_u), fmt(lv["avg_subiters"]),
        ])
    _write_rows(path, header, rows)


def write_qoi_series(series, path):
    header = ["t", "x", "flowrate", "pressure_centerline", "disp_mag",
              "scheme"]
    sampled = " ".join(fmt(t) for t in series.sampled_times)
    preamble = [
        "quantities sampled at the intermediate (theta) level nearest "
        "each requested time",
        f"sampled_times: {sampled}",
    ]
    rows = []
    for i, t in enumerate(series.times):
        for j, x in enumerate(series.stations):
            rows.append([
                fmt(t), fmt(x), fmt(series.flowrate[i, j]),
                fmt(series.pressure[i, j]), fmt(series.disp[i, j]),
                series.scheme,
            ])
    _write_rows(path, header, rows, preamble)


def write_iteration_table(results, path):
    header = ["scheme", "avg_subiters", "converged"]
    rows = [
        [scheme, fmt(avg), int(conv)]
        for scheme, (avg, conv) in results.items()
    ]
    _write_rows(path, header, rows)


def write_energy_series(budget, path):
    header = ["level", "energy", "dissipation", "numerical"]
    rows = [
        [n, fmt(budget.energy[n]), fmt(budget.dissipation[n]),
         fmt(budget.numerical[n])]
        for n in range(len(budget.energy))
    ]
    preamble = [f"slack: {fmt(budget.slack)}"]
    _write_rows(path, header, rows, preamble)


def write_config_echo(sections, path):
    """Echo the effective configuration in flat INI form."""
    with open(path, "w", newline="\n") as f:
        for name in sorted(sections):
            f.write(f"[{name}]\n")
            for key in sorted(sections[name]):
                f.write(f"{key} = {sections[name][key]}\n")
            f.write("\n")
