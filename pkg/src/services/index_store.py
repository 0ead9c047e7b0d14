"""
索引目录
ingest把语料副本、倒排索引、向量矩阵和清单写到一个目录；run从目录加载
"""

import json
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from ..config.settings import EngineSettings
from ..core.errors import DataError, UsageError
from ..schemas.records import IndexManifest
from ..utils.jsonl import file_sha256
from ..utils.logger import logger
from .bm25_index import BM25Index
from .corpus import CorpusHandle, ingest_corpus
from .vector_index import HashedEmbedder, VectorIndex, load_embedding_sidecar

CORPUS_FILE = "corpus.jsonl"
BM25_FILE = "bm25.json"
VECTORS_FILE = "vectors.npy"
MANIFEST_FILE = "manifest.json"

PathLike = Union[str, Path]


@dataclass
class IndexBundle:
    """一次运行所需的只读索引"""
    corpus: CorpusHandle
    bm25: BM25Index
    vectors: VectorIndex
    manifest: Optional[IndexManifest] = None


def build_indexes(
    corpus: CorpusHandle,
    settings: EngineSettings,
    embeddings_path: Optional[PathLike] = None,
) -> IndexBundle:
    """在内存中为语料建全部索引"""
    embedder = HashedEmbedder(settings.embedding_dim)
    sidecar = load_embedding_sidecar(embeddings_path) if embeddings_path else None
    return IndexBundle(
        corpus=corpus,
        bm25=BM25Index(corpus, k1=settings.bm25_k1, b=settings.bm25_b),
        vectors=VectorIndex.build(corpus, embedder, sidecar),
    )


def read_manifest(index_dir: PathLike) -> Optional[IndexManifest]:
    """读取清单，不存在时返回None"""
    path = Path(index_dir) / MANIFEST_FILE
    if not path.is_file():
        return None
    try:
        return IndexManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise DataError(f"索引清单格式错误: {path}") from e


def _artifacts_present(index_dir: Path) -> bool:
    return all((index_dir / name).is_file() for name in (CORPUS_FILE, BM25_FILE, VECTORS_FILE, MANIFEST_FILE))


def write_index(
    corpus_path: PathLike,
    index_dir: PathLike,
    settings: EngineSettings,
    embeddings_path: Optional[PathLike] = None,
) -> Tuple[IndexManifest, bool]:
    """
    建索引并写入目录

    Args:
        corpus_path: 语料JSONL
        index_dir: 输出目录
        settings: 引擎配置
        embeddings_path: 可选的预计算嵌入旁路文件

    Returns:
        (清单, 是否实际写入)；输入与参数未变时不写任何文件

    Raises:
        UsageError: 输出路径是已存在的普通文件
        DataError: 语料或旁路文件错误、维度不一致
    """
    index_dir = Path(index_dir)
    if index_dir.exists() and not index_dir.is_dir():
        raise UsageError(f"索引输出路径不是目录: {index_dir}")

    embedder = HashedEmbedder(settings.embedding_dim)
    corpus_sha = file_sha256(corpus_path) if Path(corpus_path).is_file() else None
    embeddings_sha = file_sha256(embeddings_path) if embeddings_path and Path(embeddings_path).is_file() else None

    existing = read_manifest(index_dir) if index_dir.is_dir() else None
    if existing and corpus_sha and _artifacts_present(index_dir):
        up_to_date = existing.matches(
            format_version=IndexManifest.model_fields["format_version"].default,
            corpus_sha256=corpus_sha,
            embeddings_sha256=embeddings_sha,
            embedder_id=embedder.embedder_id,
            dimension=embedder.dimension,
            bm25_k1=settings.bm25_k1,
            bm25_b=settings.bm25_b,
        )
        if up_to_date:
            logger.info(f"索引已是最新: {index_dir}")
            return existing, False

    corpus = ingest_corpus(corpus_path)
    bundle = build_indexes(corpus, settings, embeddings_path)

    manifest = IndexManifest(
        corpus_sha256=corpus.source_sha256 or file_sha256(corpus_path),
        embeddings_sha256=embeddings_sha,
        embedder_id=embedder.embedder_id,
        dimension=embedder.dimension,
        doc_count=corpus.stats.count,
        mean_token_length=corpus.stats.mean_token_length,
        bm25_k1=settings.bm25_k1,
        bm25_b=settings.bm25_b,
    )

    index_dir.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(corpus_path, index_dir / CORPUS_FILE)
    (index_dir / BM25_FILE).write_text(json.dumps(bundle.bm25.to_dict(), ensure_ascii=False), encoding="utf-8")
    np.save(index_dir / VECTORS_FILE, bundle.vectors.matrix, allow_pickle=False)
    (index_dir / MANIFEST_FILE).write_text(manifest.model_dump_json(indent=2), encoding="utf-8")

    logger.info(
        f"索引已写入 {index_dir}: {manifest.doc_count} 篇文档, 维度={manifest.dimension}, "
        f"平均长度={manifest.mean_token_length:.2f}"
    )
    return manifest, True


def load_index(index_dir: PathLike, settings: EngineSettings) -> IndexBundle:
    """
    从目录加载索引

    Raises:
        DataError: 目录不完整、语料与清单哈希不一致、向量维度与配置不一致
    """
    index_dir = Path(index_dir)
    manifest = read_manifest(index_dir)
    if manifest is None or not _artifacts_present(index_dir):
        raise DataError(f"索引目录不完整，请先运行 ingest: {index_dir}")

    corpus_path = index_dir / CORPUS_FILE
    corpus = ingest_corpus(corpus_path)
    if corpus.source_sha256 != manifest.corpus_sha256:
        raise DataError(f"索引中的语料与清单不一致: {corpus_path}")

    if manifest.dimension != settings.embedding_dim:
        logger.warning(f"索引维度 {manifest.dimension} 与配置 {settings.embedding_dim} 不同，按索引维度查询")

    try:
        bm25_data = json.loads((index_dir / BM25_FILE).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"倒排索引文件损坏: {e.msg}") from e
    bm25 = BM25Index.from_dict(bm25_data, corpus)

    matrix = np.load(index_dir / VECTORS_FILE, allow_pickle=False)
    if matrix.ndim != 2:
        matrix = matrix.reshape(len(corpus), manifest.dimension)
    vectors = VectorIndex(corpus.doc_ids, matrix, HashedEmbedder(manifest.dimension))

    logger.info(f"已加载索引 {index_dir}: {len(corpus)} 篇文档")
    return IndexBundle(corpus=corpus, bm25=bm25, vectors=vectors, manifest=manifest)
