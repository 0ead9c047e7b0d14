"""
JSONL读写工具
所有引擎文件（语料、数据集、结果、训练对、夹具）都是一行一个JSON对象
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, Tuple, Union

from ..core.errors import CorpusFormatError, DataError, UsageError
from .logger import logger

PathLike = Union[str, Path]


def iter_jsonl(path: PathLike) -> Iterator[Tuple[int, Dict[str, Any]]]:
    """
    逐行读取JSONL文件

    Args:
        path: 文件路径

    Yields:
        (行号, 解析后的对象)，行号从1开始；空白行跳过，读完后按文件记一条警告

    Raises:
        DataError: 文件不存在
        CorpusFormatError: 某行不是JSON对象
    """
    file_path = Path(path)
    if not file_path.is_file():
        raise DataError(f"文件不存在: {path}", {"path": str(path)})

    blank_lines = 0
    with file_path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                blank_lines += 1
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"JSON解析失败: {e.msg}", line_number) from e
            if not isinstance(record, dict):
                raise CorpusFormatError("每行必须是JSON对象", line_number)
            yield line_number, record

    if blank_lines:
        logger.warning(f"{path}: 跳过 {blank_lines} 个空白行")


def dumps_line(record: Dict[str, Any]) -> str:
    """序列化一条记录（键顺序保持插入顺序，保证字节级可复现）"""
    return json.dumps(record, ensure_ascii=False, allow_nan=False)


def ensure_writable(path: PathLike, force: bool = False) -> Path:
    """检查输出路径：已存在且未指定--force时拒绝覆盖"""
    file_path = Path(path)
    if file_path.exists() and not force:
        raise UsageError(f"输出文件已存在，使用 --force 覆盖: {path}", {"path": str(path)})
    if file_path.parent and not file_path.parent.exists():
        file_path.parent.mkdir(parents=True, exist_ok=True)
    return file_path


def write_jsonl(path: PathLike, records: Iterable[Dict[str, Any]], force: bool = False) -> int:
    """
    写出JSONL文件

    Returns:
        写出的记录数
    """
    file_path = ensure_writable(path, force)
    count = 0
    with file_path.open("w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            handle.write(dumps_line(record))
            handle.write("\n")
            count += 1
    return count


def file_sha256(path: PathLike) -> str:
    """计算文件SHA-256"""
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()
