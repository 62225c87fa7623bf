"""Operator entry points.

    revq ingest   --manifest data/animals/manifest.csv
    revq index    --manifest ... --out index.json
    revq play     --manifest ... --entity cheetah --seed 7 [--debug]
    revq simulate --manifest ... --answerer oracle --target cheetah --seed 7
    revq eval     --manifest ... --targets targets.txt --seeds 3 --out eval.csv
    revq serve    --manifest ... --bind 127.0.0.1:8000

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .corpus import IngestError, ingest_corpus
from .decision import DecisionError
from .game import GameConfig, GameEngine, GameError, SessionState, load_game_config, write_transcript
from .question import AnswerLabel
from .questioner import MAX_TURNS, oracle_answerer, random_answerer, simulate_game
from .retrieval import build_index

EVAL_COLUMNS = [
    "target", "seed", "won", "turns",
    "best_guess_probability", "mean_recovery", "convergence_rate",
]

ESTIMATE_CAVEAT = (
    "estimated accuracy treats any probability gain for the target as a correct "
    "answer; crowd-sourced questioner behavior makes this ground truth noisy"
)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="revq", description="reverse twenty questions engine")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--manifest", default="data/animals/manifest.csv")
        p.add_argument("--granularity", choices=["paragraph", "sentence"], default="paragraph")
        p.add_argument("--config", help="game config file (key = value lines)")

    p = sub.add_parser("ingest", help="load and validate a corpus")
    add_common(p)

    p = sub.add_parser("index", help="persist a BM25 index as JSON")
    add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--k1", type=float, default=1.2)
    p.add_argument("--b", type=float, default=0.75)

    p = sub.add_parser("play", help="interactive terminal game")
    add_common(p)
    p.add_argument("--entity", default="random")
    p.add_argument("--seed", type=int)
    p.add_argument("--debug", action="store_true")
    p.add_argument("--scorer-url")
    p.add_argument("--transcript", help="write the session transcript JSONL here")

    p = sub.add_parser("simulate", help="self-play one game")
    add_common(p)
    p.add_argument("--answerer", choices=["engine", "random", "oracle"], required=True)
    p.add_argument("--target", default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output prefix; writes PREFIX.jsonl and PREFIX.metrics.json")

    p = sub.add_parser("eval", help="batch-evaluate games to CSV")
    add_common(p)
    p.add_argument("--targets", required=True, help="file with one entity name per line")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--answerer", choices=["engine", "random", "oracle"], default="oracle")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--estimate-ground-truth", action="store_true")

    p = sub.add_parser("serve", help="run the HTTP service")
    add_common(p)
    p.add_argument("--bind", default="127.0.0.1:8000")
    p.add_argument("--scorer-url")

    return parser


def _load_engine(args, scorer=None) -> GameEngine:
    config = GameConfig()
    if args.config:
        config = load_game_config(args.config, config)
    return GameEngine.from_manifest(
        args.manifest, config=config, scorer=scorer, granularity=args.granularity
    )


def _cmd_ingest(args) -> int:
    taxonomy, store = ingest_corpus(args.manifest, granularity=args.granularity)
    n_passages = len(store.all_passages())
    print(f"ingested {len(taxonomy)} entities, {n_passages} passages")
    return 0


def _cmd_index(args) -> int:
    _taxonomy, store = ingest_corpus(args.manifest, granularity=args.granularity)
    index = build_index(store.all_passages(), k1=args.k1, b=args.b)
    index.save(args.out)
    print(f"indexed {index.doc_count} passages -> {args.out}")
    return 0


def _cmd_play(args) -> int:
    scorer = None
    if args.scorer_url:
        from .service import HttpScorer

        scorer = HttpScorer(args.scorer_url)
    engine = _load_engine(args, scorer=scorer)
    session = engine.new_session(target=args.entity.strip().lower(), seed=args.seed)
    print(f"ready: {len(engine.taxonomy)} entities loaded. "
          f'ask questions, "guess: NAME" to guess, "quit" to stop.')
    for raw in sys.stdin:
        line = raw.strip()
        if not line:
            continue
        if line.lower() == "quit":
            engine.end_session(session, SessionState.EXHAUSTED)
            print(f"game over. the answer was {session.target}.")
            break
        if line.lower().startswith("guess:"):
            name = line[len("guess:"):].strip().lower()
            correct = engine.guess(session, name)
            verdict = "correct!" if correct else "wrong."
            print(f"{verdict} the answer was {session.target}. turns: {session.turn}")
            break
        try:
            record = engine.answer_question(session, line)
        except GameError as exc:
            print(f"error: {exc}")
            continue
        print(record.answer.value.replace("_", " "))
        if args.debug:
            print(
                f"  rule={record.rule_fired} s_full={record.target_scores.full:.4f} "
                f"mean={record.stats.mean:.4f} std={record.stats.std:.4f} "
                f"best={record.stats.best:.4f} detour={record.detour_reported}"
            )
    if args.transcript:
        write_transcript(session, args.transcript)
    return 0


def _run_one(engine, answerer_kind: str, target: str, seed: int):
    taxonomy = engine.taxonomy
    session = None
    if answerer_kind == "oracle":
        answerer = oracle_answerer(taxonomy, target)
    elif answerer_kind == "random":
        rng = random.Random(seed)
        answerer = lambda fid, text: random_answerer(rng)
    else:
        session = engine.new_session(target=target, seed=seed)
        answerer = lambda fid, text: engine.answer_question(session, text).answer
    turns, guess, metrics = simulate_game(answerer, target, taxonomy, lam=0.0 if answerer_kind == "oracle" else 0.02)
    if session is not None and session.state is SessionState.OPEN:
        engine.guess(session, guess)
    return turns, guess, metrics, session


def _cmd_simulate(args) -> int:
    engine = _load_engine(args)
    target = args.target.strip().lower()
    if target == "random":
        target = random.Random(args.seed).choice(engine.taxonomy.names())
    if target not in engine.taxonomy:
        raise GameError(f"unknown entity {target!r}")
    turns, guess, metrics, session = _run_one(engine, args.answerer, target, args.seed)
    lines = [
        json.dumps(
            {
                "turn": t.turn,
                "feature": t.feature_id,
                "question": t.question,
                "answer": t.answer.value,
                "guess_list": [[name, round(p, 9)] for name, p in t.guess_list],
            },
            sort_keys=True,
        )
        for t in turns
    ]
    lines.append(json.dumps({"guess": guess, "target": target, "won": metrics.won}, sort_keys=True))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(f"{args.out}.jsonl").write_text(text, encoding="utf-8")
        Path(f"{args.out}.metrics.json").write_text(
            json.dumps(metrics.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        if session is not None:
            write_transcript(session, f"{args.out}.session.jsonl")
    else:
        sys.stdout.write(text)
    print(f"guess={guess} target={target} won={metrics.won} turns={metrics.turns}")
    return 0


def _cmd_eval(args) -> int:
    engine = _load_engine(args)
    targets_path = Path(args.targets)
    if not targets_path.is_file():
        raise IngestError(f"targets file not found: {targets_path}")
    targets = [t.strip().lower() for t in targets_path.read_text(encoding="utf-8").splitlines() if t.strip()]
    for t in targets:
        if t not in engine.taxonomy:
            raise GameError(f"unknown entity {t!r} in targets file")

    jobs = [(target, seed) for target in targets for seed in range(args.seeds)]

    def run(job):
        target, seed = job
        turns, guess, metrics, _session = _run_one(engine, args.answerer, target, seed)
        estimated = None
        if args.estimate_ground_truth:
            gains = 0
            scored = 0
            prev = 1.0 / len(engine.taxonomy)
            for t in turns:
                p = dict((n, q) for n, q in t.guess_list).get(target)
                if p is not None:
                    scored += 1
                    if p > prev:
                        gains += 1
                    prev = p
            estimated = gains / scored if scored else None
        return (target, seed, metrics, estimated)

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]
    results.sort(key=lambda r: (r[0], r[1]))

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVAL_COLUMNS)
        for target, seed, metrics, _est in results:
            writer.writerow([
                target, seed,
                "true" if metrics.won else "false",
                metrics.turns,
                f"{metrics.best_guess_probability:.6f}",
                f"{metrics.mean_recovery:.6f}",
                f"{metrics.convergence_rate:.6f}",
            ])
    if args.estimate_ground_truth:
        meta = {
            "caveat": ESTIMATE_CAVEAT,
            "estimated_accuracy": {
                f"{target}:{seed}": est for target, seed, _m, est in results
            },
        }
        Path(f"{args.out}.meta.json").write_text(
            json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    print(f"wrote {len(results)} rows -> {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import HttpScorer, create_app

    scorer = HttpScorer(args.scorer_url) if args.scorer_url else None
    engine = _load_engine(args, scorer=scorer)
    app = create_app(engine)
    host, _, port = args.bind.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "index": _cmd_index,
    "play": _cmd_play,
    "simulate": _cmd_simulate,
    "eval": _cmd_eval,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (IngestError, DecisionError, GameError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
