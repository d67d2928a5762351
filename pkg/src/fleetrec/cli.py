"""``fleetrec`` command line: gen, train, eval, recommend, assign, serve.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric divergence.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import socketserver
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assignment import (
    CostMatrix,
    assignment_records,
    brute_force_assign,
    build_cost_matrix,
    dual_feasible,
    format_assignment,
    kuhn_munkres,
)
from .domain import D1_DEFAULT
from .energymodel import (
    Checkpoint,
    CheckpointError,
    TrainConfig,
    TrainingDiverged,
    checkpoint_version,
    predict_links,
    read_checkpoint,
    save_checkpoint,
    train,
    train_val_split,
)
from .features import D2_DEFAULT, default_schema
from .io import Catalog, DataError, dumps, read_dataset, read_vehicles, route_from_dict, write_dataset
from .metrics import evaluate
from .recommender import DEFAULT_K, format_table, recommend_one
from .synthgen import SynthConfig, format_summary, generate_dataset
from .tco import CostConfig, load_cost_config

log = logging.getLogger("fleetrec")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3
MODE_CHOICES = ("per-mile", "per-trip")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    """Fully resolved inputs of one invocation, written next to its outputs."""

    subcommand: str
    paths: dict = field(default_factory=dict)
    seed: int | None = None
    synth: dict | None = None
    train: dict | None = None
    costs: dict | None = None
    options: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "run_config.json").write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise DataError(f"config file {p} does not exist")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise DataError(f"config file {p} must hold an object")
    return cfg


def _cost_config(args, file_cfg: dict) -> CostConfig:
    path = getattr(args, "cost_config", None)
    try:
        if path is not None:
            return load_cost_config(path)
        inline = file_cfg.get("costs")
        if isinstance(inline, str):
            return load_cost_config(inline)
        if isinstance(inline, dict):
            return CostConfig.from_dict(inline)
        return load_cost_config(None)
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise DataError(f"bad cost config: {exc}") from exc


def _load_model(path) -> tuple[Checkpoint, str]:
    if path is None:
        raise UsageError("--checkpoint is required")
    if not Path(path).exists():
        raise DataError(f"checkpoint {path} does not exist")
    ck = read_checkpoint(path, expected_d1=D1_DEFAULT, expected_d2=D2_DEFAULT)
    schema = default_schema()
    if ck.params.schema.link_names != schema.link_names or ck.params.schema.vehicle_names != schema.vehicle_names:
        raise DataError(f"checkpoint {path} was built with a different feature layout")
    return ck, checkpoint_version(path)


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------


def cmd_gen(args, out=sys.stdout) -> int:
    file_cfg = _load_config_file(args.config)
    synth = dict(file_cfg.get("synth", {}))
    for key, val in (("seed", args.seed), ("trip_count", args.trips), ("n_links", args.links)):
        if val is not None:
            synth[key] = val
    try:
        cfg = SynthConfig.from_dict(synth)
        cfg.validate()
    except (TypeError, ValueError) as exc:
        raise DataError(f"bad synth config: {exc}") from exc
    ds = generate_dataset(cfg)
    try:
        write_dataset(ds, args.out)
    except OSError as exc:
        raise DataError(f"cannot write dataset to {args.out}: {exc}") from exc
    RunConfig("gen", {"out": str(args.out)}, cfg.seed, synth=cfg.to_dict()).write(args.out)
    out.write(f"wrote {len(ds.trips)} trips, {len(ds.vehicles)} vehicles, {ds.network.n_links} links to {args.out}\n\n")
    out.write(format_summary(ds.metadata["summary"]))
    return EXIT_OK


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def _write_history(history: list[dict], out_dir: Path) -> None:
    with open(out_dir / "history.jsonl", "w") as fh:
        for r in history:
            fh.write(dumps(r) + "\n")
    with open(out_dir / "history.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "lr", "train_loss", "val_loss", "val_maape", "seconds"])
        for r in history:
            w.writerow([r["epoch"], repr(r["lr"]), repr(r["train_loss"]), repr(r["val_loss"]), repr(r["val_maape"]),
                        f"{r['seconds']:.3f}"])


def cmd_train(args, out=sys.stdout) -> int:
    file_cfg = _load_config_file(args.config)
    ds = read_dataset(args.dataset)
    if not ds.trips:
        raise DataError("dataset has no trips")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    resume = None
    history: list[dict] = []
    start_epoch = 0
    best_prev = math.inf
    if args.resume:
        resume = read_checkpoint(args.resume, expected_d1=D1_DEFAULT, expected_d2=D2_DEFAULT)
        tcfg_dict = dict(resume.meta.get("train_config", {}))
        start_epoch = int(resume.meta.get("epochs_done", 0))
        history = list(resume.meta.get("history", []))
        best_prev = float(resume.meta.get("best_val_loss", math.inf))
    else:
        tcfg_dict = dict(file_cfg.get("train", {}))
    if args.seed is not None:
        tcfg_dict["seed"] = args.seed
    if args.epochs is not None:
        tcfg_dict["epochs"] = args.epochs
    if args.workers is not None:
        tcfg_dict["n_workers"] = args.workers
    try:
        tcfg = TrainConfig.from_dict(tcfg_dict)
    except (TypeError, ValueError) as exc:
        raise DataError(f"bad train config: {exc}") from exc
    RunConfig("train", {"dataset": str(args.dataset), "out": str(out_dir), "resume": args.resume},
              tcfg.seed, train=tcfg.to_dict()).write(out_dir)

    def on_epoch(rec):
        out.write(f"epoch {rec['epoch']:>3}  train {rec['train_loss']:.6g}  val {rec['val_loss']:.6g}  "
                  f"maape {rec['val_maape']:.4f}  ({rec['seconds']:.1f}s)\n")
        out.flush()

    res = train(
        ds.trips,
        tcfg,
        params=resume.params if resume else None,
        optimizer_state=resume.optimizer_state if resume else None,
        start_epoch=start_epoch,
        n_vehicles=max(v.vehicle_id for v in ds.vehicles) + 1,
        n_links=ds.network.n_links,
        on_epoch=on_epoch,
    )
    history += res.history
    new_best = min((r["val_loss"] for r in res.history), default=math.inf)
    meta = {"train_config": tcfg.to_dict(), "epochs_done": res.epochs_done, "history": history,
            "best_val_loss": min(best_prev, new_best) if history else None}
    save_checkpoint(res.last_params, out_dir / "last.bin", optimizer_state=res.optimizer_state, meta=meta)
    best_path = out_dir / "best.bin"
    if not best_path.exists() or new_best <= best_prev or not res.history:
        save_checkpoint(res.params, best_path, meta={"train_config": tcfg.to_dict(), "best_val_loss": meta["best_val_loss"]})
    _write_history(history, out_dir)
    out.write(f"checkpoint: {best_path}\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def cmd_eval(args, out=sys.stdout) -> int:
    ck, version = _load_model(args.checkpoint)
    ds = read_dataset(args.dataset)
    if not ds.trips:
        raise DataError("dataset has no trips")
    tmeta = ck.meta.get("train_config", {})
    seed, frac = int(tmeta.get("seed", 0)), float(tmeta.get("val_fraction", 0.2))
    tr_idx, va_idx = train_val_split(len(ds.trips), frac, seed)
    idx = {"train": tr_idx, "val": va_idx, "all": np.arange(len(ds.trips))}[args.split]
    trips = [ds.trips[i] for i in idx]
    if not trips:
        raise DataError(f"split {args.split!r} is empty")
    p = ck.params
    preds = np.array([predict_links(t.route, t.vehicle, p).sum(axis=0) for t in trips]).reshape(-1, 2)
    report = evaluate(trips, preds, meta={"checkpoint_version": version, "split": args.split})
    out_dir = Path(args.out)
    report.write(out_dir)
    with open(out_dir / "predictions.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trip_id", "vehicle_id", "powertrain", "n_links", "fuel_g", "pred_fuel_g", "electric_wh", "pred_electric_wh"])
        for t, pr in zip(trips, preds):
            y = t.trip_totals
            w.writerow([t.route.trip_id, t.vehicle.vehicle_id, t.vehicle.powertrain.label, t.n_links,
                        repr(float(y[0])), repr(float(pr[0])), repr(float(y[1])), repr(float(pr[1]))])
    RunConfig("eval", {"dataset": str(args.dataset), "checkpoint": str(args.checkpoint), "out": str(out_dir)},
              seed, options={"split": args.split, "checkpoint_version": version}).write(out_dir)
    out.write(report.to_text())
    return EXIT_OK


# ---------------------------------------------------------------------------
# recommend / assign
# ---------------------------------------------------------------------------


def _find_route(args, ds_dir):
    if args.trip_file:
        try:
            return route_from_dict(json.loads(Path(args.trip_file).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read trip file: {exc}") from exc
    if args.trip_id is None:
        raise UsageError("one of --trip-id or --trip-file is required")
    ds = read_dataset(ds_dir)
    for t in ds.trips:
        if t.route.trip_id == args.trip_id:
            return t.route
    raise DataError(f"trip {args.trip_id} not found in {ds_dir}")


def _parse_ids(text) -> list[int] | None:
    if text is None:
        return None
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad id list {text!r}") from None


def cmd_recommend(args, out=sys.stdout) -> int:
    file_cfg = _load_config_file(args.config)
    if args.dataset is None:
        raise UsageError("--dataset is required (vehicle catalog)")
    ck, version = _load_model(args.checkpoint)
    catalog = Catalog(tuple(read_vehicles(args.dataset)))
    ids = _parse_ids(args.candidates)
    candidates = [catalog.get(i) for i in ids] if ids is not None else list(catalog.vehicles)
    if not candidates:
        raise DataError("no candidate vehicles")
    k = args.k if args.k is not None else DEFAULT_K
    if k < 1:
        raise UsageError("--k must be positive")
    if k > len(candidates):
        print(f"warning: k={k} exceeds {len(candidates)} candidates; showing all", file=sys.stderr)
        k = len(candidates)
    route = _find_route(args, args.dataset)
    costs = _cost_config(args, file_cfg)
    ranked = recommend_one(route, candidates, ck.params, costs, k=k, alpha_prior=args.alpha)
    if args.json:
        out.write(dumps({"trip_id": route.trip_id, "checkpoint_version": version,
                         "candidates": [r.to_record() for r in ranked]}) + "\n")
    else:
        out.write(f"trip {route.trip_id}: {len(route)} links, {route.miles:.2f} mi\n")
        out.write(format_table(ranked))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "recommendation.json").write_text(
            json.dumps([r.to_record() for r in ranked], indent=2, sort_keys=True) + "\n")
        RunConfig("recommend", {"checkpoint": str(args.checkpoint), "dataset": str(args.dataset)},
                  costs=costs.to_dict(), options={"k": k, "candidates": ids, "trip_id": route.trip_id,
                                                  "alpha": args.alpha}).write(args.out)
    return EXIT_OK


def _read_matrix(path) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise DataError(f"matrix file {p} does not exist")
    text = p.read_text()
    try:
        if p.suffix == ".json":
            w = np.array(json.loads(text), dtype=np.float64)
        else:
            w = np.array([[float(x) for x in row] for row in csv.reader(text.splitlines()) if row], dtype=np.float64)
    except (ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"malformed cost matrix: {exc}") from exc
    return w


def _solve(cm: CostMatrix):
    a = kuhn_munkres(cm)
    rec = {
        "assignment": assignment_records(cm, a),
        "total_cost": a.total_cost,
        "mode": cm.mode,
        "dual": {"u": a.u.tolist(), "v": a.v.tolist(), "feasible": dual_feasible(cm, a)},
    }
    if cm.shape[1] <= 7:
        rec["brute_force_agrees"] = brute_force_assign(cm).total_cost == a.total_cost
    return rec, a


def cmd_assign(args, out=sys.stdout) -> int:
    file_cfg = _load_config_file(args.config)
    if args.mode not in MODE_CHOICES:
        raise UsageError(f"--mode must be one of {MODE_CHOICES}")
    try:
        if args.matrix:
            cm = CostMatrix(_read_matrix(args.matrix), mode=args.mode)
        else:
            if args.dataset is None:
                raise UsageError("either --matrix or --dataset/--checkpoint is required")
            ck, _ = _load_model(args.checkpoint)
            ds = read_dataset(args.dataset)
            catalog = Catalog(tuple(ds.vehicles))
            vids = _parse_ids(args.vehicle_ids)
            vehicles = [catalog.get(i) for i in vids] if vids is not None else list(ds.vehicles)
            tids = _parse_ids(args.trip_ids)
            if tids is None:
                raise UsageError("--trip-ids is required with --dataset")
            by_tid = {t.route.trip_id: t.route for t in ds.trips}
            missing = [t for t in tids if t not in by_tid]
            if missing:
                raise DataError(f"unknown trip ids {missing}")
            cm = build_cost_matrix([by_tid[t] for t in tids], vehicles, ck.params, _cost_config(args, file_cfg), args.mode)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    rec, a = _solve(cm)
    out.write(format_assignment(cm, a))
    out.write(f"dual feasible: {rec['dual']['feasible']}\n")
    if "brute_force_agrees" in rec:
        out.write(f"brute force agrees: {rec['brute_force_agrees']}\n")
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "assignment.json").write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")
        RunConfig("assign", {"matrix": args.matrix, "dataset": args.dataset, "checkpoint": args.checkpoint},
                  options={"mode": args.mode, "trip_ids": args.trip_ids, "vehicle_ids": args.vehicle_ids}).write(args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------


class RequestError(Exception):
    pass


class Server:
    """Stateless request handler over an immutable checkpoint."""

    def __init__(self, checkpoint: Checkpoint, version: str, catalog: Catalog, costs: CostConfig):
        self.params = checkpoint.params
        self.version = version
        self.catalog = catalog
        self.costs = costs

    def _vehicle(self, ref):
        if isinstance(ref, dict):
            from .domain import VehicleSpec

            try:
                return VehicleSpec.from_dict(ref)
            except (KeyError, TypeError, ValueError) as exc:
                raise RequestError(f"bad vehicle record: {exc}") from exc
        if isinstance(ref, bool) or not isinstance(ref, int):
            raise RequestError(f"vehicle reference must be an id or a record, got {ref!r}")
        try:
            return self.catalog.get(ref)
        except DataError as exc:
            raise RequestError(str(exc)) from exc

    def _vehicles(self, refs):
        if refs is None:
            return list(self.catalog.vehicles)
        if not isinstance(refs, list) or not refs:
            raise RequestError("candidates must be a nonempty list")
        return [self._vehicle(r) for r in refs]

    @staticmethod
    def _route(d):
        if not isinstance(d, dict):
            raise RequestError("trip must be an object with a links array")
        try:
            return route_from_dict(d)
        except DataError as exc:
            raise RequestError(str(exc)) from exc

    def handle(self, req) -> dict:
        rid = req.get("id") if isinstance(req, dict) else None
        try:
            if not isinstance(req, dict):
                raise RequestError("request must be a JSON object")
            kind = req.get("type")
            if kind == "recommend":
                result = self._recommend(req)
            elif kind == "assign":
                result = self._assign(req)
            elif kind == "predict":
                result = self._predict(req)
            else:
                raise RequestError(f"unknown request type {kind!r}")
            return {"id": rid, "ok": True, "type": kind, "checkpoint_version": self.version, "result": result}
        except RequestError as exc:
            return self._error(rid, "bad_request", str(exc))
        except (ValueError, KeyError, TypeError) as exc:
            return self._error(rid, "invalid", f"{type(exc).__name__}: {exc}")

    def _error(self, rid, kind, msg) -> dict:
        return {"id": rid, "ok": False, "checkpoint_version": self.version, "error": {"type": kind, "message": msg}}

    def handle_line(self, line: str) -> str:
        try:
            req = json.loads(line)
        except json.JSONDecodeError as exc:
            return dumps(self._error(None, "parse", f"malformed JSON: {exc.msg}"))
        return dumps(self.handle(req))

    def _recommend(self, req) -> dict:
        route = self._route(req.get("trip"))
        cands = self._vehicles(req.get("candidates"))
        k = req.get("k", DEFAULT_K)
        if isinstance(k, bool) or not isinstance(k, int) or k < 1:
            raise RequestError("k must be a positive integer")
        warnings = []
        if k > len(cands):
            warnings.append(f"k={k} clamped to {len(cands)}")
            k = len(cands)
        alpha = req.get("alpha_prior")
        ranked = recommend_one(route, cands, self.params, self.costs, k=k, alpha_prior=alpha)
        out = {"trip_id": route.trip_id, "candidates": [r.to_record() for r in ranked]}
        if warnings:
            out["warnings"] = warnings
        return out

    def _predict(self, req) -> dict:
        route = self._route(req.get("trip"))
        veh = self._vehicle(req.get("vehicle"))
        links = predict_links(route, veh, self.params)
        tot = links.sum(axis=0)
        return {"trip_id": route.trip_id, "vehicle_id": veh.vehicle_id, "links": links.tolist(),
                "fuel_g": float(tot[0]), "electric_wh": float(tot[1])}

    def _assign(self, req) -> dict:
        mode = req.get("mode", "per-mile")
        if mode not in MODE_CHOICES:
            raise RequestError(f"mode must be one of {MODE_CHOICES}")
        if "matrix" in req:
            try:
                cm = CostMatrix(np.array(req["matrix"], dtype=np.float64), mode=mode)
            except (TypeError, ValueError) as exc:
                raise RequestError(f"bad matrix: {exc}") from exc
        else:
            trips = req.get("trips")
            if not isinstance(trips, list) or not trips:
                raise RequestError("trips must be a nonempty list")
            routes = [self._route(t) for t in trips]
            vehicles = self._vehicles(req.get("vehicles"))
            if len(vehicles) < len(routes):
                raise RequestError(f"need at least as many vehicles as trips ({len(vehicles)} < {len(routes)})")
            cm = build_cost_matrix(routes, vehicles, self.params, self.costs, mode)
        rec, _ = _solve(cm)
        return rec


def _serve_stream(server: Server, instream, outstream, workers: int = 1) -> int:
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            lines = (ln for ln in instream if ln.strip())
            for resp in pool.map(server.handle_line, lines):
                outstream.write(resp + "\n")
                outstream.flush()
        return EXIT_OK
    for line in instream:
        if not line.strip():
            continue
        outstream.write(server.handle_line(line) + "\n")
        outstream.flush()
    return EXIT_OK


def _serve_tcp(server: Server, port: int, out) -> int:
    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            for raw in self.rfile:
                line = raw.decode("utf-8", errors="replace")
                if line.strip():
                    self.wfile.write((server.handle_line(line) + "\n").encode())
                    self.wfile.flush()

    class TCP(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    with TCP(("127.0.0.1", port), Handler) as srv:
        out.write(f"listening on 127.0.0.1:{srv.server_address[1]}\n")
        out.flush()
        try:
            srv.serve_forever()
        except KeyboardInterrupt:
            pass
    return EXIT_OK


def make_server(args) -> Server:
    file_cfg = _load_config_file(getattr(args, "config", None))
    ck, version = _load_model(args.checkpoint)
    catalog = Catalog(tuple(read_vehicles(args.dataset))) if args.dataset else Catalog(())
    return Server(ck, version, catalog, _cost_config(args, file_cfg))


def cmd_serve(args, out=sys.stdout, instream=None) -> int:
    server = make_server(args)
    if args.tcp is not None:
        return _serve_tcp(server, args.tcp, out)
    return _serve_stream(server, instream if instream is not None else sys.stdin, out, args.concurrent)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fleetrec", description="Link-level energy prediction and fleet vehicle recommendation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, *, config=True):
        if config:
            sp.add_argument("--config", help="JSON file with synth/train/costs sections")
        return sp

    g = common(sub.add_parser("gen", help="generate a synthetic labeled dataset"))
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--trips", type=int)
    g.add_argument("--links", type=int)

    t = common(sub.add_parser("train", help="train the energy model"))
    t.add_argument("--dataset", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--workers", type=int)
    t.add_argument("--resume", help="continue from a last.bin checkpoint")

    e = common(sub.add_parser("eval", help="evaluate a checkpoint"), config=False)
    e.add_argument("--dataset", required=True)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--split", choices=("val", "train", "all"), default="val")

    r = common(sub.add_parser("recommend", help="rank candidate vehicles for one trip"))
    r.add_argument("--dataset")
    r.add_argument("--checkpoint")
    r.add_argument("--trip-id", type=int)
    r.add_argument("--trip-file")
    r.add_argument("--candidates", help="comma-separated vehicle ids (default: whole catalog)")
    r.add_argument("--k", type=int)
    r.add_argument("--alpha", type=float, help="prior expected optimal $/mi")
    r.add_argument("--cost-config")
    r.add_argument("--out")
    r.add_argument("--json", action="store_true")

    a = common(sub.add_parser("assign", help="optimal vehicle-to-trip assignment"))
    a.add_argument("--matrix", help="raw cost matrix (.csv or .json), rows = vehicles")
    a.add_argument("--dataset")
    a.add_argument("--checkpoint")
    a.add_argument("--trip-ids")
    a.add_argument("--vehicle-ids")
    a.add_argument("--mode", default="per-mile", choices=MODE_CHOICES)
    a.add_argument("--cost-config")
    a.add_argument("--out")

    s = common(sub.add_parser("serve", help="answer NDJSON requests on stdin or a local socket"))
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--dataset", help="dataset directory whose vehicle catalog resolves ids")
    s.add_argument("--cost-config")
    s.add_argument("--tcp", type=int, metavar="PORT")
    s.add_argument("--concurrent", type=int, default=1, metavar="N")
    return p


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "recommend": cmd_recommend,
            "assign": cmd_assign, "serve": cmd_serve}


def main(argv=None, out=None, instream=None) -> int:
    out = out if out is not None else sys.stdout
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("fleetrec: a subcommand is required (gen, train, eval, recommend, assign, serve)")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        if args.command == "serve":
            return cmd_serve(args, out, instream)
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CheckpointError, FileNotFoundError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDiverged as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
