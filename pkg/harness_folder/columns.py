class ReportColumns:
    CSV = (
        "n", "m", "trials",
        "ef", "ef1", "ef11", "prop", "prop1",
        "mean_solver_s", "max_solver_s",
        "mean_forest_s", "max_forest_s",
        "mean_round_s", "max_round_s",
        "mean_pert_ratio", "max_pert_ratio",
    )

    TIMING = ("mean_solver_s", "max_solver_s", "mean_forest_s", "max_forest_s",
              "mean_round_s", "max_round_s")

    # (label, row attribute, kind) in table order
    TABLE = (
        ("Number of agents (n)", "n", "count"),
        ("Number of goods (m)", "m", "count"),
        ("Mean run-time of gradient ascent", "mean_solver_s", "seconds"),
        ("Mean run-time of spending rearrangement", "mean_forest_s", "seconds"),
        ("Mean run-time of rounding", "mean_round_s", "seconds"),
        ("Max run-time of gradient ascent", "max_solver_s", "seconds"),
        ("Max run-time of spending rearrangement", "max_forest_s", "seconds"),
        ("Max run-time of rounding", "max_round_s", "seconds"),
        ("Number of EF allocations (out of {trials})", "ef", "count"),
        ("Number of EF1 allocations (out of {trials})", "ef1", "count"),
        ("Number of EF1-1 allocations (out of {trials})", "ef11", "count"),
        ("Number of Prop allocations (out of {trials})", "prop", "count"),
        ("Number of Prop1 allocations (out of {trials})", "prop1", "count"),
        ("Mean budget perturbation / max price", "mean_pert_ratio", "ratio"),
        ("Max budget perturbation / max price", "max_pert_ratio", "ratio"),
        ("Failed trials", "failed", "count"),
    )
