"""Command-line surface: convert, query, entail, stats, gen, bench.

Results go to stdout and are deterministic for fixed inputs and seed;
all diagnostics and timings go to stderr.  Exit codes: 1 parse failure,
2 I/O failure, 3 missing/invalid dataset files.
"""

from __future__ import annotations

import argparse
import os
import statistics
import sys
from array import array
from pathlib import Path
from time import perf_counter

import numpy as np

from . import datagen, entailment, nt, query_ops, sparql, store
from .dictionary import Dictionary, Role, ROLE_SUFFIXES

EXIT_PARSE = 1
EXIT_IO = 2
EXIT_DATASET = 3


class DatasetError(Exception):
    pass


class DatasetHandle:
    """Basename plus the four files of a converted dataset."""

    def __init__(self, basename: str):
        self.basename = basename
        base = Path(basename)
        self.tid = base.with_name(base.name + ".tid")
        self.id_files = [base.with_name(base.name + s) for s in ROLE_SUFFIXES]

    def check(self) -> None:
        missing = [str(p) for p in [self.tid, *self.id_files] if not p.is_file()]
        if missing:
            raise DatasetError(f"missing dataset files: {', '.join(missing)}")

    def load_dictionary(self) -> Dictionary:
        return Dictionary.read_id_files(self.basename)


def _default_workers() -> int:
    env = os.environ.get("TRIPLEID_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _diag(*parts) -> None:
    print(*parts, file=sys.stderr)


def cmd_convert(args) -> int:
    t0 = perf_counter()
    out_base = Path(args.out)
    tmp_suffix = ".tmp"
    dictionary = Dictionary()
    ids = array("I")
    report = nt.ParseReport()
    try:
        with open(args.input, "rb") as f:
            for stmt in nt.parse_stream(f, strict=args.strict, report=report):
                ids.append(dictionary.encode(stmt.subject, Role.SUBJECT))
                ids.append(dictionary.encode(stmt.predicate, Role.PREDICATE))
                ids.append(dictionary.encode(stmt.object, Role.OBJECT))
    except nt.ParseError as err:
        _diag(f"parse error: {err}")
        return EXIT_PARSE
    except OSError as err:
        _diag(f"I/O error: {err}")
        return EXIT_IO

    tmp_tid = out_base.with_name(out_base.name + ".tid" + tmp_suffix)
    tmp_dict_base = out_base.with_name(out_base.name + tmp_suffix)
    try:
        triples = np.frombuffer(ids, dtype=np.uint32).reshape(-1, 3)
        store.write_tid(triples, tmp_tid)
        id_paths = dictionary.write_id_files(tmp_dict_base)
        os.replace(tmp_tid, out_base.with_name(out_base.name + ".tid"))
        for tmp_path, suffix in zip(id_paths, ROLE_SUFFIXES):
            os.replace(tmp_path, out_base.with_name(out_base.name + suffix))
    except OSError as err:
        for leftover in [tmp_tid, *(tmp_dict_base.parent.glob(tmp_dict_base.name + ".?id"))]:
            try:
                os.unlink(leftover)
            except OSError:
                pass
        _diag(f"I/O error: {err}")
        return EXIT_IO

    elapsed = perf_counter() - t0
    handle = DatasetHandle(args.out)
    n_subj, n_pred, n_obj = dictionary.role_counts()
    _diag(f"triples\t{len(triples)}")
    _diag(f"distinct_subjects\t{n_subj}")
    _diag(f"distinct_predicates\t{n_pred}")
    _diag(f"distinct_objects\t{n_obj}")
    _diag(f"skipped_lines\t{report.skipped}")
    _diag(f"parse_errors\t{report.error_count}")
    for path in [handle.tid, *handle.id_files]:
        _diag(f"bytes\t{path.name}\t{path.stat().st_size}")
    _diag(f"elapsed_seconds\t{elapsed:.3f}")
    return 0


def cmd_query(args) -> int:
    handle = DatasetHandle(args.basename)
    try:
        handle.check()
    except DatasetError as err:
        _diag(str(err))
        return EXIT_DATASET

    t0 = perf_counter()
    try:
        text = Path(args.query).read_text(encoding="utf-8")
    except OSError as err:
        _diag(f"I/O error: {err}")
        return EXIT_IO
    try:
        ast = sparql.parse_query(text)
    except sparql.QuerySyntaxError as err:
        _diag(f"query error: {err}")
        return EXIT_PARSE

    dictionary = handle.load_dictionary()
    compiled = sparql.compile_keys(ast, dictionary)
    t_load = perf_counter() - t0

    timings = query_ops.QueryTimings()
    table = query_ops.evaluate_query(
        compiled,
        str(handle.tid),
        dictionary,
        workers=args.workers,
        chunk_triples=args.chunk_triples,
        timings=timings,
    )
    sys.stdout.write(query_ops.decode_table(table, dictionary))
    total = perf_counter() - t0
    _diag("load\tsearch\tjoin\ttotal")
    _diag(f"{t_load:.6f}\t{timings.search:.6f}\t{timings.join:.6f}\t{total:.6f}")
    return 0


def cmd_entail(args) -> int:
    handle = DatasetHandle(args.basename)
    try:
        handle.check()
    except DatasetError as err:
        _diag(str(err))
        return EXIT_DATASET
    dictionary = handle.load_dictionary()
    run = entailment.run_rule(
        args.rule,
        str(handle.tid),
        dictionary,
        workers=args.workers,
        chunk_triples=args.chunk_triples,
    )
    for s, p, o in sorted(run.conclusions):
        line = (
            f"{dictionary.decode_lexical(s)} "
            f"{dictionary.decode_lexical(p)} "
            f"{dictionary.decode_lexical(o)} ."
        )
        sys.stdout.write(line + "\n")
    res1, dist1, res2, dist2, total = entailment.report_counts(run)
    _diag("res1\tdist1\tres2\tdist2\tall")
    _diag(f"{res1}\t{dist1}\t{res2}\t{dist2}\t{total}")
    return 0


def cmd_stats(args) -> int:
    handle = DatasetHandle(args.basename)
    try:
        handle.check()
    except DatasetError as err:
        _diag(str(err))
        return EXIT_DATASET
    count = store.read_header(handle.tid)
    dictionary = handle.load_dictionary()
    n_subj, n_pred, n_obj = dictionary.role_counts()
    print(f"triples\t{count}")
    print(f"distinct_subjects\t{n_subj}")
    print(f"distinct_predicates\t{n_pred}")
    print(f"distinct_objects\t{n_obj}")
    for path in [handle.tid, *handle.id_files]:
        print(f"bytes\t{path.name}\t{path.stat().st_size}")
    print(f"device_memory_bytes\t{store.device_memory_bytes(count * 3)}")
    return 0


def cmd_gen(args) -> int:
    out = sys.stdout
    for line in datagen.generate_lines(
        args.triples,
        args.subjects,
        args.predicates,
        args.objects,
        seed=args.seed,
        iri_len=args.iri_len,
    ):
        out.write(line + "\n")
    return 0


def cmd_bench(args) -> int:
    handle = DatasetHandle(args.basename)
    try:
        handle.check()
    except DatasetError as err:
        _diag(str(err))
        return EXIT_DATASET
    query_files = sorted(Path(args.queries_dir).glob("*.rq"))
    if not query_files:
        _diag(f"no .rq files in {args.queries_dir}")
        return EXIT_IO
    print("query\trun\tparse\tload\tsearch\tjoin\ttotal\trows")
    for path in query_files:
        text = path.read_text(encoding="utf-8")
        runs = []
        for k in range(args.repeat):
            t0 = perf_counter()
            ast = sparql.parse_query(text)
            t_parse = perf_counter() - t0
            t1 = perf_counter()
            dictionary = handle.load_dictionary()
            compiled = sparql.compile_keys(ast, dictionary)
            t_load = perf_counter() - t1
            timings = query_ops.QueryTimings()
            table = query_ops.evaluate_query(
                compiled,
                str(handle.tid),
                dictionary,
                workers=args.workers,
                chunk_triples=args.chunk_triples,
                timings=timings,
            )
            total = perf_counter() - t0
            row = (t_parse, t_load, timings.search, timings.join, total, table.n_rows)
            runs.append(row)
            print(
                f"{path.name}\t{k}\t{row[0]:.6f}\t{row[1]:.6f}\t{row[2]:.6f}"
                f"\t{row[3]:.6f}\t{row[4]:.6f}\t{row[5]}"
            )
        medians = [statistics.median(r[i] for r in runs) for i in range(5)]
        print(
            f"{path.name}\tmedian\t{medians[0]:.6f}\t{medians[1]:.6f}"
            f"\t{medians[2]:.6f}\t{medians[3]:.6f}\t{medians[4]:.6f}\t{runs[0][5]}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tripleid",
        description="Dictionary-encoded RDF store with brute-force parallel search",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert N-Triples to the four-file dataset")
    p.add_argument("input")
    p.add_argument("--out", required=True, help="output basename")
    p.add_argument("--strict", action="store_true", help="abort on first parse error")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("query", help="run a query; TSV solutions on stdout")
    p.add_argument("basename")
    p.add_argument("query", help="query file")
    _add_exec_flags(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("entail", help="apply one RDFS rule; N-Triples on stdout")
    p.add_argument("basename")
    p.add_argument("--rule", type=int, required=True, choices=sorted(entailment.RULES))
    _add_exec_flags(p)
    p.set_defaults(func=cmd_entail)

    p = sub.add_parser("stats", help="dataset counts and sizes")
    p.add_argument("basename")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gen", help="emit a synthetic N-Triples dataset")
    p.add_argument("--triples", type=int, required=True)
    p.add_argument("--subjects", type=int, default=1000)
    p.add_argument("--predicates", type=int, default=50)
    p.add_argument("--objects", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iri-len", type=int, default=40)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="time every query in a directory")
    p.add_argument("basename")
    p.add_argument("queries_dir")
    p.add_argument("--repeat", type=int, default=1)
    _add_exec_flags(p)
    p.set_defaults(func=cmd_bench)

    return parser


def _add_exec_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workers", type=int, default=_default_workers())
    p.add_argument("--chunk-triples", type=int, default=None)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (store.StoreError, DatasetError) as err:
        _diag(str(err))
        return EXIT_DATASET
    except OSError as err:
        _diag(f"I/O error: {err}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
