"""Command-line entry point: `geogrid <subcommand> ...`."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, TextIO

from . import __version__
from .bench import BenchSpec, bench_compare
from .cell import CellId, parse_cell, token_parse
from .coverer import CoveringParams, covering
from .discretize import (Observation, load_manifest, discretize_raster, discretize_vector,
                         exact_decimal, read_ascii_grid)
from .enrich import Feature, RelationRecord, enrich_compressed, enrich_feature
from .rdf import (IriScheme, GEOMETRY_MODES, dedupe, emit_cell, emit_observation, emit_relations,
                  materialize_transitive, write_ntriples)
from .shard import ShardMap, plan, split_triples
from .store import PathQuery, TripleStore, eval_path, expand
from .wkt import AntimeridianPolicy, cell_to_wkt, parse_wkt, read_wkt_records

CONFIG_SCHEMA = 1
RECORDS_HEADER = "# geogrid records"
OBS_HEADER = "# geogrid observations"


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    level: int = 13
    antimeridian: str = "split"
    geometry: str = "split"
    resource_base: str = IriScheme.resource
    ontology_base: str = IriScheme.ontology
    max_step: float = 0.05
    min_level: int = 0
    max_level: int = 30
    max_cells: int = 8
    seed: int = 0
    jobs: int = 0

    def __post_init__(self):
        if not 0 <= self.level <= 30:
            raise UsageError(f"level {self.level} outside 0..30")
        AntimeridianPolicy.parse(self.antimeridian)
        if self.geometry not in GEOMETRY_MODES:
            raise UsageError(f"geometry must be one of {GEOMETRY_MODES}")
        if not self.max_step > 0:
            raise UsageError("max_step must be positive")
        if self.jobs < 0:
            raise UsageError("jobs must be >= 0")
        IriScheme(self.resource_base, self.ontology_base)

    @property
    def scheme(self) -> IriScheme:
        return IriScheme(self.resource_base, self.ontology_base)

    @property
    def workers(self) -> int:
        return self.jobs or os.cpu_count() or 1

    def as_dict(self) -> dict:
        return {"schema": CONFIG_SCHEMA, **dataclasses.asdict(self)}


def load_config(path: Optional[str]) -> dict:
    """key=value lines; `#` comments; unknown keys are an error."""
    if not path:
        return {}
    fields = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        k, v = (x.strip() for x in line.split("=", 1))
        k = k.replace("-", "_")
        if k not in fields:
            raise UsageError(f"{path}:{lineno}: unknown config key {k!r}")
        cast = {"int": int, "float": float}.get(fields[k], str)
        try:
            out[k] = cast(v)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {k}") from None
    return out


# --- I/O helpers ----------------------------------------------------------------------

def _open_in(path: str) -> TextIO:
    if path == "-":
        return sys.stdin
    try:
        return open(path, encoding="utf-8")
    except FileNotFoundError:
        raise UsageError(f"input not found: {path}") from None


def _read_lines(path: str) -> list[str]:
    if path == "-":
        return sys.stdin.readlines()
    with _open_in(path) as fh:
        return fh.readlines()


def _writer(args) -> TextIO:
    out = getattr(args, "out", None)
    if not out:
        return sys.stdout
    fh = getattr(args, "_out_fh", None)
    if fh is None:
        fh = args._out_fh = open(out, "w", encoding="utf-8")
    return fh


def _read_features(path: str, cfg: RunConfig) -> list[Feature]:
    lines = _read_lines(path)
    recs = list(read_wkt_records(lines)) if any("\t" in l for l in lines) else \
        [("feature", parse_wkt("".join(lines)))]
    return [Feature(i, g, cfg.max_step) for i, g in recs]


def _ent(e) -> str:
    return f"s2:{e.token}" if isinstance(e, CellId) else e


def _parse_ent(s: str):
    return token_parse(s[3:]) if s.startswith("s2:") else s


def _header(kind: str, cfg: RunConfig, extra: dict) -> str:
    return f"{kind} {json.dumps({**cfg.as_dict(), **extra}, sort_keys=True)}\n"


def _pmap(fn, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(min(workers, len(items))) as ex:
        return list(ex.map(fn, items))


# --- subcommands --------------------------------------------------------------------

def cmd_cell(args, cfg: RunConfig):
    c = parse_cell(args.cell)
    out = _writer(args)
    if args.action == "wkt":
        out.write(cell_to_wkt(c, args.antimeridian or cfg.antimeridian) + "\n")
        return
    if args.action == "children":
        out.writelines(ch.token + "\n" for ch in c.children())
        return
    center = c.center()
    info = {"id": str(c.raw), "token": c.token, "level": c.level, "face": c.face,
            "center": [center.lat, center.lng], "area_km2": c.exact_area() * 6371.0072 ** 2,
            "parent": c.parent(c.level - 1).token if c.level else None,
            "children": [x.token for x in c.children()] if not c.is_leaf else [],
            "neighbors": [x.token for x in c.edge_neighbors()]}
    out.write(json.dumps(info) + "\n")


def cmd_wkt(args, cfg: RunConfig):
    out = _writer(args)
    if args.action == "cell":
        out.write(cell_to_wkt(parse_cell(args.target), args.antimeridian or cfg.antimeridian) + "\n")
        return
    for ident, g in read_wkt_records(_read_lines(args.target)):
        out.write(json.dumps({"id": ident, "kind": g.kind, "crossing": g.crossing,
                              "wkt": g.to_wkt()}) + "\n")


def cmd_cover(args, cfg: RunConfig):
    level = args.level if args.level is not None else cfg.level
    mode = args.mode
    if mode == "homogeneous":
        params = CoveringParams.homogeneous(level)
    else:
        lo = args.min_level if args.min_level is not None else cfg.min_level
        hi = level if args.level is not None else cfg.max_level
        cap = args.max_cells if args.max_cells is not None else cfg.max_cells
        params = CoveringParams(lo, hi, None if mode == "interior" and args.max_cells is None else cap, mode)
    out = _writer(args)
    feats = _read_features(args.input, cfg)
    for f in feats:
        cov = covering(f.region, params)
        if len(feats) == 1 and f.id == "feature":
            out.writelines(t + "\n" for t in cov.tokens())
        else:
            out.write(f"{f.id}\t{' '.join(cov.tokens())}\n")


def _enrich_one(job):
    f, level, compressed, min_level, boundary = job
    if compressed and f.kind == "A":
        return enrich_compressed(f, min_level, level, boundary)
    return enrich_feature(f, level)


def cmd_enrich(args, cfg: RunConfig):
    level = args.level if args.level is not None else cfg.level
    feats = _read_features(args.input, cfg)
    jobs = [(f, level, args.compressed, args.min_level, args.boundary_level) for f in feats]
    records = [r for recs in _pmap(_enrich_one, jobs, args.jobs or cfg.workers) for r in recs]
    out = _writer(args)
    if args.format == "ntriples":
        out.writelines(write_ntriples(emit_relations(records, cfg.scheme)))
        return
    out.write(_header(RECORDS_HEADER, cfg, {"level": level, "compressed": args.compressed}))
    for r in records:
        out.write(f"{_ent(r.subject)}\t{r.relation.value}\t{_ent(r.object)}\t{r.provenance}\n")


def _vector_one(job):
    f, level, prop, time, otype, manifest = job
    return discretize_vector(f, level, prop, time, otype, manifest)


def _write_obs(out, obs: list[Observation], cfg, args, manifest):
    if args.format == "ntriples":
        out.writelines(write_ntriples(t for o in obs for t in emit_observation(o, cfg.scheme, manifest)))
        return
    out.write(_header(OBS_HEADER, cfg, {}))
    for o in obs:
        out.write("\t".join([o.feature_of_interest.token, o.property, o.category or "",
                             exact_decimal(o.value), o.unit, o.quantity_kind,
                             o.phenomenon_time or "", o.obs_type]) + "\n")


def cmd_discretize(args, cfg: RunConfig):
    level = args.level if args.level is not None else cfg.level
    manifest = load_manifest(_read_lines(args.manifest)) if args.manifest else None
    if args.source == "vector":
        feats = _read_features(args.input, cfg)
        prop = args.property or "overlapArea"
        otype = args.obs_type or "S2OverlapObservation"
        jobs = [(f, level, prop, args.time, otype, manifest) for f in feats]
        obs = [o for part in _pmap(_vector_one, jobs, args.jobs or cfg.workers) for o in part]
        # one summed observation per cell across features sharing the property
        merged: dict = {}
        for o in obs:
            key = (o.feature_of_interest, o.property, o.phenomenon_time)
            prev = merged.get(key)
            merged[key] = o if prev is None else dataclasses.replace(prev, value=prev.value + o.value)
        obs = sorted(merged.values(), key=Observation.sort_key)
    else:
        if args.input == "-":
            raise UsageError("raster input must be a file with a CRS sidecar")
        grid = read_ascii_grid(args.input, args.sidecar)
        stat = {"percent": "percent", "percent-by-category": "percent"}.get(args.stat, args.stat)
        obs = discretize_raster(grid, level, stat, args.property or "landCover", args.time,
                                args.obs_type or "S2RasterObservation", manifest)
    _write_obs(_writer(args), obs, cfg, args, manifest)


def _read_records(lines: Iterable[str]) -> list[RelationRecord]:
    out = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) not in (3, 4):
            raise ValueError(f"record line {lineno}: expected 3 or 4 columns")
        prov = parts[3] if len(parts) == 4 else "precomputed"
        out.append(RelationRecord(_parse_ent(parts[0]), parts[1], _parse_ent(parts[2]), prov))
    return out


def _read_observations(lines: Iterable[str]) -> list[Observation]:
    out = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        p = line.rstrip("\n").split("\t")
        if len(p) != 8:
            raise ValueError(f"observation line {lineno}: expected 8 columns")
        out.append(Observation(token_parse(p[0]), p[1], float(p[3]), p[4], p[5], p[6] or None,
                               p[2] or None, p[7]))
    return out


def cmd_emit(args, cfg: RunConfig):
    if args.format != "ntriples":
        raise UsageError("only --format=ntriples is supported")
    scheme = IriScheme(args.base or cfg.resource_base, args.ontology or cfg.ontology_base)
    lines = _read_lines(args.input)
    head = next((l for l in lines if l.strip()), "")
    manifest = load_manifest(_read_lines(args.manifest)) if args.manifest else None
    triples = []
    cells = set()
    if head.startswith(OBS_HEADER):
        obs = _read_observations(lines)
        for o in obs:
            triples += emit_observation(o, scheme, manifest)
        cells = {o.feature_of_interest for o in obs}
    else:
        records = _read_records(lines)
        triples = emit_relations(records, scheme)
        cells = {e for r in records for e in (r.subject, r.object) if isinstance(e, CellId)}
    if args.cells:
        geometry = args.geometry or cfg.geometry
        for c in sorted(cells):
            triples += emit_cell(c, geometry, scheme)
    if args.closure:
        triples = materialize_transitive(triples, scheme)
    _writer(args).writelines(write_ntriples(dedupe(triples)))


def _term(text: str):
    return expand(text) if not text.startswith("http") else text


def cmd_query(args, cfg: RunConfig):
    binds = {}
    for b in args.bind or []:
        k, sep, v = b.partition("=")
        if not sep or k not in ("start", "end"):
            raise UsageError(f"--bind expects start=<iri> or end=<iri>, got {b!r}")
        binds[k] = _term(v)
    lines = []
    for path in args.inputs or ["-"]:
        lines += _read_lines(path)
    store = TripleStore.load(lines)
    q = PathQuery.parse(args.path, binds.get("start"), binds.get("end"))
    out = _writer(args)
    for a, b in sorted(eval_path(store, q), key=lambda x: (str(x[0]), str(x[1]))):
        out.write(f"{a}\t{b}\n")


def cmd_bench(args, cfg: RunConfig):
    spec = BenchSpec(points=args.points, regions=args.regions,
                     level=args.level if args.level is not None else cfg.level,
                     seed=args.seed if args.seed is not None else cfg.seed)
    report = bench_compare(spec, args.runs)
    report["run_config"] = cfg.as_dict()
    _writer(args).write(json.dumps(report, indent=2) + "\n")


def cmd_shard(args, cfg: RunConfig):
    out = _writer(args)
    if args.action == "plan":
        feats = _read_features(args.input, cfg)
        if len(feats) != 1:
            raise UsageError("shard plan takes a single region")
        m = plan(feats[0].region, args.level)
        out.write(m.to_json() + "\n")
        return
    if not args.map:
        raise UsageError("shard split needs --map")
    m = ShardMap.from_json(Path(args.map).read_text())
    res = split_triples(_read_lines(args.input), m, cfg.scheme)
    if args.out_dir:
        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        for name, lines in res.streams.items():
            (d / f"{name}.nt").write_text("".join(lines), encoding="utf-8")
    out.write(json.dumps(res.report()) + "\n")


# --- parser --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(json.dumps({"error": "usage", "message": message}) + "\n")
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="geogrid", description="Discrete global grid pipeline for knowledge graphs.")
    p.add_argument("--version", action="version",
                   version=f"geogrid {__version__} (config schema {CONFIG_SCHEMA})")
    p.add_argument("--config", help="key=value config file (default: $GEOGRID_CONFIG)")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, out=True):
        if out:
            sp.add_argument("--out", help="output file (default stdout)")
        return sp

    s = common(sub.add_parser("cell", help="inspect a cell"))
    s.add_argument("action", choices=["info", "children", "wkt"])
    s.add_argument("cell", help="decimal id or hex token")
    s.add_argument("--antimeridian", choices=["split", "reject", "point", "point-abstract"])
    s.set_defaults(func=cmd_cell)

    s = common(sub.add_parser("wkt", help="parse WKT records or serialize a cell"))
    s.add_argument("action", choices=["parse", "cell"])
    s.add_argument("target", help="file of id<TAB>WKT lines, or a cell token for `cell`")
    s.add_argument("--antimeridian", choices=["split", "reject", "point", "point-abstract"])
    s.set_defaults(func=cmd_wkt)

    s = common(sub.add_parser("cover", help="cover a region with cells"))
    s.add_argument("input")
    s.add_argument("--mode", choices=["ordinary", "homogeneous", "interior"], default="ordinary")
    s.add_argument("--level", type=int)
    s.add_argument("--min-level", type=int)
    s.add_argument("--max-cells", type=int)
    s.set_defaults(func=cmd_cover)

    s = common(sub.add_parser("enrich", help="topological relations between features and cells"))
    s.add_argument("input")
    s.add_argument("--level", type=int)
    s.add_argument("--compressed", action="store_true")
    s.add_argument("--min-level", type=int, default=3)
    s.add_argument("--boundary-level", type=int)
    s.add_argument("--format", choices=["tsv", "ntriples"], default="tsv")
    s.add_argument("--jobs", type=int)
    s.set_defaults(func=cmd_enrich)

    s = common(sub.add_parser("discretize", help="per-cell observations"))
    s.add_argument("source", choices=["vector", "raster"])
    s.add_argument("input")
    s.add_argument("--level", type=int)
    s.add_argument("--property")
    s.add_argument("--time")
    s.add_argument("--stat", choices=["percent", "percent-by-category", "mean", "sum"], default="percent")
    s.add_argument("--manifest")
    s.add_argument("--sidecar")
    s.add_argument("--obs-type")
    s.add_argument("--format", choices=["tsv", "ntriples"], default="tsv")
    s.add_argument("--jobs", type=int)
    s.set_defaults(func=cmd_discretize)

    s = common(sub.add_parser("emit", help="N-Triples from records or observations"))
    s.add_argument("input", nargs="?", default="-")
    s.add_argument("--format", default="ntriples")
    s.add_argument("--base")
    s.add_argument("--ontology")
    s.add_argument("--geometry", choices=list(GEOMETRY_MODES))
    s.add_argument("--cells", action="store_true", help="also emit every referenced cell")
    s.add_argument("--closure", action="store_true", help="materialize transitive sfWithin")
    s.add_argument("--manifest")
    s.set_defaults(func=cmd_emit)

    s = common(sub.add_parser("query", help="evaluate a property path"))
    s.add_argument("inputs", nargs="*")
    s.add_argument("--path", required=True)
    s.add_argument("--bind", action="append", help="start=<iri> or end=<iri>")
    s.set_defaults(func=cmd_query)

    s = common(sub.add_parser("bench", help="enriched join vs geometric scan"))
    s.add_argument("--points", type=int, default=50_000)
    s.add_argument("--regions", type=int, default=100)
    s.add_argument("--level", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--runs", type=int, default=5)
    s.set_defaults(func=cmd_bench)

    s = common(sub.add_parser("shard", help="plan shards or split a triple stream"))
    s.add_argument("action", choices=["plan", "split"])
    s.add_argument("input")
    s.add_argument("--level", type=int, default=2)
    s.add_argument("--map")
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_shard)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        parser.print_help(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if not getattr(args, "command", None):
        parser.print_help(sys.stderr)
        return 2
    try:
        cfg = RunConfig(**load_config(args.config or os.environ.get("GEOGRID_CONFIG")))
        try:
            args.func(args, cfg)
        finally:
            if getattr(args, "_out_fh", None) is not None:
                args._out_fh.close()
    except UsageError as e:
        sys.stderr.write(json.dumps({"error": "usage", "message": str(e)}) + "\n")
        return 2
    except BrokenPipeError:
        return _closed_pipe()
    except Exception as e:  # reported as a machine-readable line
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e)}) + "\n")
        return 1
    try:
        sys.stdout.flush()
    except BrokenPipeError:
        return _closed_pipe()
    return 0


def _closed_pipe() -> int:
    # a downstream reader such as `head` went away; silence the exit-time flush
    devnull = os.open(os.devnull, os.O_WRONLY)
    os.dup2(devnull, sys.stdout.fileno())
    return 0


if __name__ == "__main__":
    sys.exit(main())
