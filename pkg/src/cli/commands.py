"""
命令行入口
子命令: ingest / run / eval / recompute / gen-pairs / synth
退出码: 0 成功, 1 用法错误, 2 数据错误, 3 后端传输错误
"""

import argparse
import asyncio
import os
from typing import Any, Callable, Dict, List, Optional, Sequence

from pydantic import ValidationError
from rich.console import Console

from .. import plugins  # noqa: F401  注册后端
from ..config.run_config import RunConfig
from ..config.settings import CONFIG_ENV_VAR, EngineSettings, load_settings, read_config_file
from ..core.backend import backend_registry
from ..core.batch_runner import BatchRunner
from ..core.errors import DataError, DrRagError, UsageError
from ..services.corpus import ingest_corpus
from ..services.dataset import check_corpus_references, load_dataset
from ..services.evaluator import evaluate_run, load_report, render_report, verify_report, write_report
from ..services.index_store import load_index, write_index
from ..services.pair_generator import gen_training_pairs, parse_ratio
from ..services.synth import SynthSpec, generate, write_synth
from ..utils.clock import ClockMode
from ..utils.jsonl import ensure_writable, write_jsonl
from ..utils.logger import logger, setup_logging

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3

# 配置文件中的别名 -> 参数名
CONFIG_ALIASES = {"threshold": "classifier_threshold"}

console = Console()


class CliParser(argparse.ArgumentParser):
    """参数错误抛出UsageError，由main统一映射为退出码1"""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _bool_value(raw: str) -> bool:
    return str(raw).strip().lower() in ("1", "true", "yes", "on")


def build_parser() -> CliParser:
    """构造参数解析器"""
    parser = CliParser(prog="drrag", description="DR-RAG 两阶段检索问答引擎")
    parser.add_argument("--config", help=f"key=value 配置文件（也可用环境变量 {CONFIG_ENV_VAR} 指定）")
    parser.add_argument("--log-level", dest="log_level", help="日志级别，如 DEBUG/INFO/WARNING")

    subparsers = parser.add_subparsers(dest="command", parser_class=CliParser, metavar="COMMAND")

    ingest = subparsers.add_parser("ingest", help="读取语料并建索引")
    ingest.add_argument("--corpus", help="语料JSONL（必填）")
    ingest.add_argument("--out", help="索引输出目录（必填）")
    ingest.add_argument("--embeddings", help="预计算嵌入旁路JSONL")
    ingest.set_defaults(handler=cmd_ingest, required=("corpus", "out"))

    run = subparsers.add_parser("run", help="对数据集运行检索流水线")
    run.add_argument("--strategy", choices=["bm25", "sm", "qdc", "cis", "cfs"], help="检索策略（必填）")
    run.add_argument("--k", type=int, help="总预算（必填）")
    run.add_argument("--k1", type=int, help="第一阶段数量，默认ceil(k/2)")
    run.add_argument("--k2", type=int, help="第二阶段每个父文档的候选深度，默认k")
    run.add_argument("--threshold", dest="classifier_threshold", type=float, help="分类器判正阈值，默认0.5")
    run.add_argument("--base-retriever", dest="base_retriever", choices=["sm", "bm25"], help="两阶段策略的检索器")
    run.add_argument("--cis-pairwise", dest="cis_pairwise", action="store_true", default=None,
                     help="CIS对Cnt中所有文档两两判断")
    run.add_argument("--no-concat", dest="concat_second_stage", action="store_false", default=None,
                     help="第二阶段只用原查询检索，不拼接父文档")
    run.add_argument("--dataset", help="数据集JSONL（必填）")
    run.add_argument("--index", help="ingest生成的索引目录（必填）")
    run.add_argument("--classifier", help="分类器选择器: lexical | constant:positive|negative | http:URL")
    run.add_argument("--llm", help="LLM选择器: mock[:FIXTURE] | http:URL，默认mock")
    run.add_argument("--out", help="结果JSONL（必填）")
    run.add_argument("--seed", type=int, help="随机种子")
    run.add_argument("--jobs", type=int, help="并发查询数，默认1")
    run.add_argument("--keep-going", dest="keep_going", action="store_true", default=None,
                     help="查询失败时写错误行并继续")
    run.add_argument("--clock", choices=[mode.value for mode in ClockMode], help="时钟模式，默认auto")
    run.add_argument("--force", action="store_true", default=None, help="覆盖已存在的输出文件")
    run.set_defaults(handler=cmd_run, required=("strategy", "k", "dataset", "index", "out"))

    evaluate = subparsers.add_parser("eval", help="评测运行结果")
    evaluate.add_argument("--results", help="结果JSONL（必填）")
    evaluate.add_argument("--dataset", help="数据集JSONL（必填）")
    evaluate.add_argument("--corpus", help="语料JSONL，提供时校验gold文档")
    evaluate.add_argument("--baseline", help="基线结果JSONL，用于相对耗时和调用次数")
    evaluate.add_argument("--out", help="JSON报告路径，默认 <results>.report.json")
    evaluate.add_argument("--force", action="store_true", default=None, help="覆盖已存在的报告")
    evaluate.set_defaults(handler=cmd_eval, required=("results", "dataset"))

    recompute = subparsers.add_parser("recompute", help="由逐查询明细复算报告汇总值")
    recompute.add_argument("--report", help="JSON报告（必填）")
    recompute.set_defaults(handler=cmd_recompute, required=("report",))

    pairs = subparsers.add_parser("gen-pairs", help="生成分类器训练对")
    pairs.add_argument("--dataset", help="数据集JSONL（必填）")
    pairs.add_argument("--corpus", help="语料JSONL（必填）")
    pairs.add_argument("--ratio", help="正:负 比例，默认1:1")
    pairs.add_argument("--seed", type=int, help="随机种子，默认0")
    pairs.add_argument("--max-pairs", dest="max_pairs", type=int, help="总对数上限")
    pairs.add_argument("--distractors-per-record", dest="distractors_per_record", type=int,
                       help="无候选池时从语料采样的干扰文档数，默认2")
    pairs.add_argument("--out", help="训练对JSONL（必填）")
    pairs.add_argument("--force", action="store_true", default=None, help="覆盖已存在的输出文件")
    pairs.set_defaults(handler=cmd_gen_pairs, required=("dataset", "corpus", "out"))

    synth = subparsers.add_parser("synth", help="生成合成两跳语料和数据集")
    synth.add_argument("--queries", type=int, help="查询数，默认100")
    synth.add_argument("--distractors", type=int, help="每个查询的干扰文档数，默认3")
    synth.add_argument("--bridge-pool", dest="bridge_pool", type=int, help="桥实体池大小，默认等于查询数")
    synth.add_argument("--vocab-size", dest="vocab_size", type=int, help="伪名称词表大小，默认20000")
    synth.add_argument("--seed", type=int, help="随机种子，默认0")
    synth.add_argument("--out-corpus", dest="out_corpus", help="语料输出JSONL（必填）")
    synth.add_argument("--out-dataset", dest="out_dataset", help="数据集输出JSONL（必填）")
    synth.add_argument("--force", action="store_true", default=None, help="覆盖已存在的输出文件")
    synth.set_defaults(handler=cmd_synth, required=("out_corpus", "out_dataset"))

    parser.subparser_map = subparsers.choices
    return parser


def apply_config(subparser: argparse.ArgumentParser, args: argparse.Namespace, config: Dict[str, Any]):
    """命令行未给出的参数从配置文件补齐，按参数自身的类型转换"""
    for action in subparser._actions:
        dest = action.dest
        if dest in ("help", "handler", "required") or getattr(args, dest, None) is not None:
            continue
        if dest not in config:
            continue
        raw = config[dest]
        try:
            if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                value = _bool_value(raw)
            elif action.type is not None:
                value = action.type(raw)
            else:
                value = raw
        except (TypeError, ValueError):
            raise UsageError(f"配置项 {dest} 的值无效: {raw!r}") from None
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"配置项 {dest} 的值无效: {raw!r}（可选: {', '.join(map(str, action.choices))}）")
        setattr(args, dest, value)


def check_required(args: argparse.Namespace):
    missing = [name for name in args.required if getattr(args, name, None) is None]
    if missing:
        flags = ", ".join("--" + name.replace("_", "-") for name in missing)
        raise UsageError(f"{args.command} 缺少必填参数: {flags}")


def _flag(args: argparse.Namespace, name: str, default: Any = None) -> Any:
    value = getattr(args, name, None)
    return default if value is None else value


def cmd_ingest(args: argparse.Namespace, settings: EngineSettings) -> int:
    manifest, written = write_index(args.corpus, args.out, settings, args.embeddings)
    if written:
        console.print(f"索引已写入 {args.out}: {manifest.doc_count} 篇文档, 维度 {manifest.dimension}")
    else:
        console.print(f"索引已是最新 (up to date): {args.out}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace, settings: EngineSettings) -> int:
    fields = {name: getattr(args, name) for name in RunConfig.model_fields if getattr(args, name, None) is not None}
    run_config = RunConfig(**fields)

    ensure_writable(run_config.out, run_config.force)
    bundle = load_index(run_config.index, settings)
    dataset = load_dataset(run_config.dataset)
    check_corpus_references(dataset, bundle.corpus)

    runner = BatchRunner(
        bundle=bundle,
        cfg=run_config.pipeline_config(),
        llm_selector=run_config.llm,
        classifier_selector=run_config.classifier,
        settings=settings,
        jobs=run_config.jobs,
        keep_going=run_config.keep_going,
        clock_mode=run_config.clock,
        seed=run_config.seed,
    )
    rows = asyncio.run(runner.run(dataset))
    write_jsonl(run_config.out, rows, force=True)

    summary = runner.summary
    console.print(
        f"已写出 {run_config.out}: 成功 {summary.succeeded}, 失败 {summary.failed}, "
        f"成功率 {summary.success_rate:.1%}"
    )
    return EXIT_OK if summary.failed == 0 else EXIT_BACKEND


def cmd_eval(args: argparse.Namespace, settings: EngineSettings) -> int:
    corpus = ingest_corpus(args.corpus) if args.corpus else None
    report = evaluate_run(args.results, args.dataset, corpus=corpus, baseline_path=args.baseline)
    out_path = args.out or f"{args.results}.report.json"
    write_report(report, out_path, force=bool(args.force))
    render_report(report, console)
    console.print(f"报告已写出: {out_path}")
    return EXIT_OK


def cmd_recompute(args: argparse.Namespace, settings: EngineSettings) -> int:
    report = load_report(args.report)
    mismatches = verify_report(report)
    if mismatches:
        raise DataError(f"报告汇总值与逐查询明细不一致: {', '.join(mismatches)}", {"fields": mismatches})
    console.print(f"复算一致: {args.report} ({report.count} 个查询)")
    return EXIT_OK


def cmd_gen_pairs(args: argparse.Namespace, settings: EngineSettings) -> int:
    ratio = parse_ratio(_flag(args, "ratio", "1:1"))
    ensure_writable(args.out, bool(args.force))
    dataset = load_dataset(args.dataset)
    corpus = ingest_corpus(args.corpus)
    pairs, summary = gen_training_pairs(
        dataset,
        corpus,
        ratio=ratio,
        seed=_flag(args, "seed", 0),
        max_pairs=args.max_pairs,
        distractors_per_record=_flag(args, "distractors_per_record", 2),
    )
    write_jsonl(args.out, (pair.to_dict() for pair in pairs), force=True)
    console.print(f"已写出 {args.out}: {summary.describe()}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace, settings: EngineSettings) -> int:
    spec_fields = {
        "num_queries": args.queries,
        "distractors_per_query": args.distractors,
        "bridge_entity_pool": args.bridge_pool,
        "vocab_size": args.vocab_size,
        "seed": args.seed,
    }
    spec = SynthSpec(
        embedding_dim=settings.embedding_dim,
        **{name: value for name, value in spec_fields.items() if value is not None},
    )
    ensure_writable(args.out_corpus, bool(args.force))
    ensure_writable(args.out_dataset, bool(args.force))
    result = generate(spec)
    write_synth(result, args.out_corpus, args.out_dataset, force=True)
    console.print(
        f"已生成 {len(result.instances)} 个查询: {args.out_corpus}, {args.out_dataset}"
    )
    return EXIT_OK


def _validation_message(error: ValidationError) -> str:
    first = error.errors()[0]
    location = ".".join(str(part) for part in first.get("loc", ()))
    return f"{location}: {first.get('msg')}" if location else str(first.get("msg"))


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    命令行主函数

    Returns:
        退出码
    """
    parser = build_parser()
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:
            # --help
            return int(e.code or 0)

        if not args.command:
            parser.print_help()
            return EXIT_USAGE

        config_path = args.config or os.environ.get(CONFIG_ENV_VAR)
        config = {CONFIG_ALIASES.get(key, key): value for key, value in read_config_file(config_path).items()}
        settings = load_settings(config)
        setup_logging(level=args.log_level or settings.log_level, log_file=settings.log_file)

        apply_config(parser.subparser_map[args.command], args, config)
        check_required(args)
        logger.debug(f"可用后端: classifier={backend_registry.get_available('classifier')}, "
                     f"llm={backend_registry.get_available('llm')}")

        handler: Callable[[argparse.Namespace, EngineSettings], int] = args.handler
        return handler(args, settings)

    except ValidationError as e:
        logger.error(f"参数错误: {_validation_message(e)}")
        return EXIT_USAGE
    except DrRagError as e:
        logger.error(e.message)
        return e.exit_code


__all__: List[str] = ["main", "build_parser"]
