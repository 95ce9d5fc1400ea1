"""Command-line driver: simulate, estimate, audit, test, ingest, serve.

Every run is reproducible from its config: flags can come from a JSON
config file (``--config``), with explicit command-line flags taking
precedence, and the resolved configuration (seed included) is written
next to the outputs. Exit codes: 0 success, 2 validation problem,
3 identifiability problem.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import os
import sys

import numpy as np

from . import io as sio
from .design import DummyDesign, sample_dataset, uniform_design
from .errors import IdentifiabilityViolation, IngestError, SubsetPrivError
from .estimation import (
    EstimateResult,
    em_mle,
    mom_general,
    mom_uniform,
    one_step,
    scaled_l2_benchmark,
)
from .privacy import (
    fully_private_report,
    non_private_report,
    per_record_report,
    population_report,
)
from .testing import (
    build_table,
    bonferroni_test,
    combined_power_study,
    dependent_joint,
    lrt_test,
    PairDataset,
    pearson_test,
    permutation_calibrate,
    ranking_study,
    raw_contingency_pearson,
    sample_pair_dataset,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IDENTIFIABILITY = 3


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(";", ",").split(",") if tok.strip()]


def _parse_ints(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _parse_matrix(text: str) -> np.ndarray:
    rows = [_parse_floats(row) for row in text.split(";") if row.strip()]
    return np.array(rows, dtype=float)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("config file must hold a JSON object")
    return cfg


def _resolve(args: argparse.Namespace, config: dict, key: str, default=None):
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _load_design(source, p: int | None = None):
    """A design flag is either a JSON path or the word 'uniform'."""
    if source is None or source == "uniform":
        if p is None:
            raise ValueError("--design uniform needs a category count")
        return uniform_design(int(p))
    return sio.read_design(source)


def _out_dir(args, config) -> str:
    out = _resolve(args, config, "out", ".")
    os.makedirs(out, exist_ok=True)
    return out


def _write_run_config(out: str, resolved: dict):
    sio.dump_json(resolved, os.path.join(out, "run_config.json"))


def _estimate_to_dict(res: EstimateResult) -> dict:
    return {
        "method": res.method,
        "w_hat": res.w_hat.w.tolist(),
        "w_raw": res.w_raw.tolist(),
        "covariance": None if res.covariance is None else res.covariance.tolist(),
        "iterations": res.iterations,
        "log_likelihood": res.log_likelihood,
        "diagnostics": {
            "identifiable": res.diagnostics.identifiable,
            "projection_applied": res.diagnostics.projection_applied,
            "singular_hessian": res.diagnostics.singular_hessian,
            "notes": list(res.diagnostics.notes),
        },
    }


def _test_to_dict(res) -> dict:
    return {"method": res.method, "statistic": res.statistic, "df": res.df,
            "p_value": res.p_value, "calibration": res.calibration,
            "warnings": list(res.warnings)}


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    seed = int(_resolve(args, config, "seed", 0))
    n = int(_resolve(args, config, "n", 1000))
    mode = _resolve(args, config, "mode", "single")
    resolved = {"command": "simulate", "mode": mode, "n": n, "seed": seed, "out": out}

    if mode == "single":
        w = _resolve(args, config, "w")
        if w is None:
            raise ValueError("simulate needs --w")
        w = _parse_floats(w) if isinstance(w, str) else list(w)
        design = _load_design(_resolve(args, config, "design", "uniform"), len(w))
        obs = sample_dataset(w, design, n, seed)
        sio.write_observations(obs, os.path.join(out, "observations.csv"))
        sio.write_design(design, os.path.join(out, "design.json"))
        resolved.update({"w": w, "p": len(w)})
    elif mode == "pair":
        w_x = _resolve(args, config, "w-x")
        w_y = _resolve(args, config, "w-y")
        if w_x is None or w_y is None:
            raise ValueError("pair simulation needs --w-x and --w-y")
        w_x = _parse_floats(w_x) if isinstance(w_x, str) else list(w_x)
        w_y = _parse_floats(w_y) if isinstance(w_y, str) else list(w_y)
        rho = float(_resolve(args, config, "rho", 0.0))
        design_a = _load_design(_resolve(args, config, "design", "uniform"), len(w_x))
        design_b = _load_design(_resolve(args, config, "design-b", "uniform"), len(w_y))
        W = dependent_joint(w_x, w_y, rho)
        pairs = sample_pair_dataset(W, design_a, design_b, n, seed)
        text = sio.pairs_to_csv(pairs.masks_a, pairs.masks_b, len(w_x), len(w_y))
        sio.atomic_write_text(os.path.join(out, "pairs.csv"), text)
        sio.write_design(design_a, os.path.join(out, "design_a.json"))
        sio.write_design(design_b, os.path.join(out, "design_b.json"))
        resolved.update({"w_x": w_x, "w_y": w_y, "rho": rho})
    else:
        raise ValueError(f"unknown simulate mode {mode!r}")

    _write_run_config(out, resolved)
    return EXIT_OK


def cmd_estimate(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    seed = int(_resolve(args, config, "seed", 0))
    methods = str(_resolve(args, config, "method", "em,mom,one-step")).split(",")
    resolved = {"command": "estimate", "seed": seed, "out": out, "method": ",".join(methods)}

    if _resolve(args, config, "benchmark", False):
        w = _parse_floats(str(_resolve(args, config, "w")))
        design = _load_design(_resolve(args, config, "design", "uniform"), len(w))
        n = int(_resolve(args, config, "n", 1000))
        k = int(_resolve(args, config, "k", 100))
        bench = scaled_l2_benchmark(w, design, n, k, seed)
        rows = [["method", "mean_scaled_l2", "stderr"]]
        for m in bench.losses:
            rows.append([m, f"{bench.mean(m):.6f}", f"{bench.stderr(m):.6f}"])
        rows.append(["mle_limit", f"{bench.mle_trace:.6f}", ""])
        rows.append(["mom_limit", f"{bench.mom_trace:.6f}", ""])
        buf = _io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(rows)
        sio.atomic_write_text(os.path.join(out, "loss_table.csv"), buf.getvalue())
        resolved.update({"benchmark": True, "n": n, "k": k, "w": w})
        _write_run_config(out, resolved)
        return EXIT_OK

    design = _load_design(_resolve(args, config, "design"), _resolve(args, config, "p"))
    data = _resolve(args, config, "data")
    if data is None:
        raise ValueError("estimate needs --data")
    obs = sio.read_observations(data, design.p)
    cond = design.induced()
    results = {}
    for m in methods:
        m = m.strip()
        if m == "em":
            results[m] = em_mle(obs, design=cond)
        elif m == "mom":
            results[m] = mom_general(obs, cond)
        elif m == "mom-uniform":
            results[m] = mom_uniform(obs)
        elif m == "one-step":
            start = results.get("mom") or mom_general(obs, cond)
            results[m] = one_step(obs, cond, start)
        else:
            raise ValueError(f"unknown estimator {m!r}")
    sio.dump_json({m: _estimate_to_dict(r) for m, r in results.items()},
                  os.path.join(out, "estimates.json"))
    resolved["data"] = data
    _write_run_config(out, resolved)
    return EXIT_OK


def cmd_audit(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    resolved = {"command": "audit", "out": out}

    design = _load_design(_resolve(args, config, "design"), _resolve(args, config, "p"))
    if isinstance(design, DummyDesign):
        cond = design.induced_conditional()
    else:
        cond = design.induced()

    w_flag = _resolve(args, config, "w")
    data = _resolve(args, config, "data")
    if w_flag is not None:
        w = _parse_floats(w_flag) if isinstance(w_flag, str) else list(w_flag)
        resolved["w"] = list(w)
    elif data is not None:
        obs = sio.read_observations(data, cond.p)
        w = em_mle(obs, design=cond).w_hat.w.tolist()
        resolved["data"] = data
        resolved["w_estimated"] = w
    else:
        raise ValueError("audit needs --w or --data")

    report = {
        "non_private": non_private_report(w).as_dict(),
        "design": population_report(cond, w).as_dict(),
        "fully_private": fully_private_report(w).as_dict(),
    }
    sio.dump_json(report, os.path.join(out, "audit.json"))

    if data is not None:
        obs = sio.read_observations(data, cond.p)
        rows = [["record_id", "subset", "size_leakage", "pred_guess", "pred_posterior"]]
        for i in range(len(obs)):
            sub = obs.subset(i)
            rec = per_record_report(sub, w)
            rows.append([str(i), ";".join(map(str, sub.indices)),
                         f"{rec.size_leakage:.6f}", str(rec.guess),
                         f"{rec.guess_posterior:.6f}"])
        buf = _io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(rows)
        sio.atomic_write_text(os.path.join(out, "per_record.csv"), buf.getvalue())

    _write_run_config(out, resolved)
    return EXIT_OK


def cmd_test(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    seed = int(_resolve(args, config, "seed", 0))
    alpha = float(_resolve(args, config, "alpha", 0.05))
    resolved = {"command": "test", "seed": seed, "alpha": alpha, "out": out}

    raw_counts = _resolve(args, config, "raw-counts")
    if raw_counts is not None:
        counts = _parse_matrix(raw_counts) if isinstance(raw_counts, str) else np.array(raw_counts)
        res = raw_contingency_pearson(counts)
        sio.dump_json({"pearson-raw": _test_to_dict(res)}, os.path.join(out, "tests.json"))
        resolved["raw_counts"] = counts.tolist()
        _write_run_config(out, resolved)
        return EXIT_OK

    study = _resolve(args, config, "study")
    if study == "ranking":
        w_x = _parse_floats(str(_resolve(args, config, "w-x", "0.1,0.2,0.3,0.4")))
        w_y = _parse_floats(str(_resolve(args, config, "w-y", "0.1,0.2,0.3,0.4")))
        rho = float(_resolve(args, config, "rho", 0.05))
        n = int(_resolve(args, config, "n", 1000))
        k = int(_resolve(args, config, "k", 200))
        da = _load_design(_resolve(args, config, "design", "uniform"), len(w_x))
        db = _load_design(_resolve(args, config, "design-b", "uniform"), len(w_y))
        aucs = ranking_study(w_x, w_y, da, db, rho, n, k, seed)
        sio.dump_json({"auc": aucs, "rho": rho, "n": n, "k": k},
                      os.path.join(out, "ranking.json"))
        resolved.update({"study": study, "rho": rho, "n": n, "k": k})
        _write_run_config(out, resolved)
        return EXIT_OK
    if study == "power":
        joint = _parse_matrix(str(_resolve(args, config, "joint-counts")))
        ns = _parse_ints(str(_resolve(args, config, "n-list", "500,1000,2000,4000")))
        k = int(_resolve(args, config, "k", 100))
        method = str(_resolve(args, config, "method", "mle"))
        p, q = joint.shape
        design = uniform_design(p * q)
        powers = combined_power_study(joint, design, ns, k, alpha, seed, method)
        sio.dump_json({"power": {str(n): v for n, v in powers.items()},
                       "alpha": alpha, "k": k, "method": method},
                      os.path.join(out, "power.json"))
        resolved.update({"study": study, "n_list": ns, "k": k})
        _write_run_config(out, resolved)
        return EXIT_OK
    if study is not None:
        raise ValueError(f"unknown study {study!r}")

    data = _resolve(args, config, "data")
    if data is None:
        raise ValueError("test needs --data (pair CSV), --raw-counts, or --study")
    design_a = _load_design(_resolve(args, config, "design"), _resolve(args, config, "p"))
    design_b = _load_design(_resolve(args, config, "design-b"), _resolve(args, config, "q"))
    with open(data, encoding="utf-8") as fh:
        masks_a, masks_b = sio.pairs_from_csv(fh.read(), design_a.p, design_b.p)
    pairs = PairDataset(masks_a, masks_b, design_a.induced(), design_b.induced())
    table = build_table(pairs)
    methods = str(_resolve(args, config, "method", "all"))
    wanted = ["pearson", "lrt-mle", "lrt-mom", "bonferroni"] if methods == "all" \
        else [m.strip() for m in methods.split(",")]
    runners = {
        "pearson": lambda prs: pearson_test(build_table(prs)),
        "lrt-mle": lambda prs: lrt_test(build_table(prs), "mle"),
        "lrt-mom": lambda prs: lrt_test(build_table(prs), "mom"),
        "bonferroni": lambda prs: bonferroni_test(build_table(prs), alpha),
    }
    calibration = str(_resolve(args, config, "calibration", "asymptotic"))
    b = int(_resolve(args, config, "b", 199))
    results = {}
    for name in wanted:
        if name not in runners:
            raise ValueError(f"unknown test {name!r}")
        if calibration == "permutation":
            results[name] = permutation_calibrate(runners[name], pairs, b=b,
                                                  alpha=alpha, seed=seed)
        else:
            results[name] = runners[name](pairs)
    sio.dump_json({m: _test_to_dict(r) for m, r in results.items()},
                  os.path.join(out, "tests.json"))
    resolved.update({"data": data, "calibration": calibration})
    _write_run_config(out, resolved)
    return EXIT_OK


def cmd_ingest(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    data = _resolve(args, config, "data")
    schema_path = _resolve(args, config, "schema")
    if data is None or schema_path is None:
        raise ValueError("ingest needs --data and --schema")
    with open(schema_path, encoding="utf-8") as fh:
        schema = json.load(fh)
    columns: dict[str, list[str]] = schema["columns"]

    with open(data, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestError("input CSV has no header")
        missing = [c for c in columns if c not in reader.fieldnames]
        if missing:
            raise IngestError(f"columns missing from input: {missing}")
        encoded: dict[str, list[int]] = {c: [] for c in columns}
        lookup = {c: {label: i for i, label in enumerate(labels)}
                  for c, labels in columns.items()}
        for row_number, row in enumerate(reader, start=2):
            for c in columns:
                value = (row[c] or "").strip()
                if value not in lookup[c]:
                    raise IngestError(
                        f"row {row_number}: unmapped value {value!r} in column {c!r}")
                encoded[c].append(lookup[c][value])

    n_rows = len(next(iter(encoded.values()))) if encoded else 0
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(columns))
    for i in range(n_rows):
        writer.writerow([encoded[c][i] for c in columns])
    sio.atomic_write_text(os.path.join(out, "encoded.csv"), buf.getvalue())

    summary: dict[str, dict] = {"n": n_rows, "columns": {}}
    dist_col = _resolve(args, config, "distribution")
    for c, labels in columns.items():
        counts = np.bincount(encoded[c], minlength=len(labels)) if n_rows else np.zeros(len(labels))
        w = (counts / counts.sum()).tolist() if counts.sum() else [0.0] * len(labels)
        summary["columns"][c] = {"labels": labels, "counts": counts.tolist(), "w": w}
    sio.dump_json(summary, os.path.join(out, "ingest_summary.json"))
    if dist_col:
        entry = summary["columns"][dist_col]
        for i, label in enumerate(entry["labels"]):
            print(f"{i}\t{label}\t{entry['w'][i]:.6f}")
    _write_run_config(out, {"command": "ingest", "data": data, "schema": schema_path,
                            "out": out})
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import CollectionEngine, CollectionStore, create_app

    config = _load_config(args.config)
    seed = _resolve(args, config, "seed")
    store_path = _resolve(args, config, "store")
    engine = CollectionEngine(seed=None if seed is None else int(seed),
                              store=CollectionStore(store_path) if store_path
                              else CollectionStore())
    labels_flag = _resolve(args, config, "labels")
    if labels_flag:
        labels = [tok.strip() for tok in str(labels_flag).split(",")]
        design = _load_design(_resolve(args, config, "design", "uniform"), len(labels))
        vid = engine.register_variable(labels, design,
                                       _resolve(args, config, "variable-id"))
        print(f"registered variable {vid!r} with {len(labels)} categories")
    app = create_app(engine)
    host = str(_resolve(args, config, "host", "127.0.0.1"))
    port = int(_resolve(args, config, "port", 8000))
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subsetpriv",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file; flags override its fields")
        sp.add_argument("--out", help="output directory (default .)")
        sp.add_argument("--seed", type=int)

    p_sim = sub.add_parser("simulate", help="generate released-subset datasets")
    common(p_sim)
    p_sim.add_argument("--mode", choices=["single", "pair"])
    p_sim.add_argument("--w", help="comma-separated probabilities")
    p_sim.add_argument("--w-x")
    p_sim.add_argument("--w-y")
    p_sim.add_argument("--rho", type=float)
    p_sim.add_argument("--n", type=int)
    p_sim.add_argument("--design", help="design JSON path or 'uniform'")
    p_sim.add_argument("--design-b")
    p_sim.set_defaults(func=cmd_simulate)

    p_est = sub.add_parser("estimate", help="estimate a distribution from released data")
    common(p_est)
    p_est.add_argument("--data")
    p_est.add_argument("--design")
    p_est.add_argument("--p", type=int)
    p_est.add_argument("--method", help="comma list: em,mom,mom-uniform,one-step")
    p_est.add_argument("--benchmark", action="store_true", default=None)
    p_est.add_argument("--w", help="true distribution (benchmark mode)")
    p_est.add_argument("--n", type=int)
    p_est.add_argument("--k", type=int)
    p_est.set_defaults(func=cmd_estimate)

    p_aud = sub.add_parser("audit", help="privacy report for a design")
    common(p_aud)
    p_aud.add_argument("--design")
    p_aud.add_argument("--p", type=int)
    p_aud.add_argument("--w")
    p_aud.add_argument("--data")
    p_aud.set_defaults(func=cmd_audit)

    p_test = sub.add_parser("test", help="independence tests and power studies")
    common(p_test)
    p_test.add_argument("--data")
    p_test.add_argument("--design")
    p_test.add_argument("--design-b")
    p_test.add_argument("--p", type=int)
    p_test.add_argument("--q", type=int)
    p_test.add_argument("--method")
    p_test.add_argument("--calibration", choices=["asymptotic", "permutation"])
    p_test.add_argument("--b", type=int)
    p_test.add_argument("--alpha", type=float)
    p_test.add_argument("--raw-counts", help="rows 'a,b;c,d' of a raw table")
    p_test.add_argument("--study", choices=["ranking", "power"])
    p_test.add_argument("--w-x")
    p_test.add_argument("--w-y")
    p_test.add_argument("--rho", type=float)
    p_test.add_argument("--n", type=int)
    p_test.add_argument("--n-list")
    p_test.add_argument("--k", type=int)
    p_test.add_argument("--joint-counts")
    p_test.set_defaults(func=cmd_test)

    p_ing = sub.add_parser("ingest", help="encode labeled CSV data to category indices")
    common(p_ing)
    p_ing.add_argument("--data")
    p_ing.add_argument("--schema")
    p_ing.add_argument("--distribution", help="print this column's distribution")
    p_ing.set_defaults(func=cmd_ingest)

    p_srv = sub.add_parser("serve", help="run the live collection service")
    common(p_srv)
    p_srv.add_argument("--labels")
    p_srv.add_argument("--design")
    p_srv.add_argument("--variable-id")
    p_srv.add_argument("--host")
    p_srv.add_argument("--port", type=int)
    p_srv.add_argument("--store")
    p_srv.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except IdentifiabilityViolation as exc:
        print(f"identifiability error: {exc}", file=sys.stderr)
        return EXIT_IDENTIFIABILITY
    except (SubsetPrivError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
