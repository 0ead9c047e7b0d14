"""
合成两跳数据
每个查询生成一篇静态相关文档（与查询共享头实体）、一篇动态相关文档（只通过桥实体与静态文档相连，
与查询不共享任何token）和若干共享关系词的干扰文档
"""

import math
import random
from collections import Counter, deque
from dataclasses import dataclass, field
from itertools import combinations, product
from pathlib import Path
from typing import Any, Deque, Dict, List, Optional, Sequence, Set, Tuple, Union

from pydantic import BaseModel, Field

from ..core.errors import SynthSpecError
from ..utils.jsonl import ensure_writable, write_jsonl
from ..utils.logger import logger
from .corpus import CorpusHandle, Document, tokenize
from .retrieval import concat_query
from .vector_index import HashedEmbedder, VectorIndex

PathLike = Union[str, Path]

QUESTION_WORDS = ("who", "is", "the", "of")

# 关系词 -> 动态文档中使用的动词
RELATIONS: Dict[str, str] = {
    "spouse": "married",
    "mentor": "trained",
    "rival": "opposed",
    "partner": "joined",
    "heir": "succeeded",
    "patron": "sponsored",
    "ally": "supported",
    "deputy": "assisted",
}

# (查询中的类别词, 静态文档中的具体称谓)
KINSHIP: Tuple[Tuple[str, str], ...] = (
    ("child", "son"),
    ("child", "daughter"),
    ("parent", "father"),
    ("parent", "mother"),
    ("sibling", "brother"),
    ("sibling", "sister"),
    ("student", "apprentice"),
    ("guardian", "warden"),
)

ONSETS = ("b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z")
VOWELS = ("a", "e", "i", "o", "u")
CODAS = ("n", "r", "l", "s", "m", "k")

RESERVED_WORDS: Set[str] = (
    set(QUESTION_WORDS)
    | set(RELATIONS)
    | set(RELATIONS.values())
    | {category for category, _ in KINSHIP}
    | {kin for _, kin in KINSHIP}
)

# 头实体由2个名称组成，桥实体由3个名称组成
HEAD_TOKENS = 2
BRIDGE_TOKENS = 3

MAX_REPAIR_ROUNDS = 50


class SynthSpec(BaseModel):
    """合成数据规格"""
    num_queries: int = Field(100, ge=1, description="查询数")
    distractors_per_query: int = Field(3, ge=0, description="每个查询的干扰文档数")
    bridge_entity_pool: Optional[int] = Field(None, ge=1, description="桥实体池大小，默认等于查询数")
    vocab_size: int = Field(20000, ge=1, description="伪名称词表大小")
    seed: int = Field(0, description="随机种子")
    embedding_dim: int = Field(256, ge=1, description="参考嵌入器维度")

    @property
    def pool_size(self) -> int:
        return self.bridge_entity_pool if self.bridge_entity_pool is not None else self.num_queries

    @property
    def filler_names(self) -> int:
        """答案和干扰文档主语/宾语需要的名称数"""
        return self.num_queries * (1 + 2 * self.distractors_per_query)

    @property
    def required_names(self) -> int:
        return BRIDGE_TOKENS * self.pool_size + HEAD_TOKENS * self.num_queries + self.filler_names


@dataclass
class SynthInstance:
    """一个两跳查询及其文档"""
    query_id: str
    question: str
    answer: str
    head: str
    bridge: str
    relation: str
    category: str
    kin: str
    stat: Document
    dyn: Document
    distractors: List[Document] = field(default_factory=list)

    @property
    def documents(self) -> List[Document]:
        return [self.stat, self.dyn, *self.distractors]

    def to_dataset_record(self) -> Dict[str, Any]:
        return {
            "query_id": self.query_id,
            "question": self.question,
            "answers": [self.answer],
            "gold_doc_ids": [self.stat.doc_id, self.dyn.doc_id],
            "candidates": [doc.doc_id for doc in self.documents],
        }


@dataclass
class SynthResult:
    """生成结果"""
    spec: SynthSpec
    instances: List[SynthInstance]
    repair_rounds: int = 0

    def corpus_records(self) -> List[Dict[str, Any]]:
        return [
            {"doc_id": doc.doc_id, "title": doc.title, "text": doc.text}
            for instance in self.instances
            for doc in instance.documents
        ]

    def dataset_records(self) -> List[Dict[str, Any]]:
        return [instance.to_dataset_record() for instance in self.instances]

    def corpus(self) -> CorpusHandle:
        return CorpusHandle.from_documents(doc for instance in self.instances for doc in instance.documents)


@dataclass
class BucketLayout:
    """嵌入桶用途划分"""
    head_pairs: List[Tuple[int, ...]]
    spare_pairs: Deque[Tuple[int, ...]]
    head_buckets: Set[int]


def compose_names() -> List[str]:
    """所有可组合的伪名称（辅音-元音-辅音-元音-韵尾），固定顺序，不含保留词"""
    names = []
    for parts in product(ONSETS, VOWELS, ONSETS, VOWELS, CODAS):
        name = "".join(parts)
        if name not in RESERVED_WORDS:
            names.append(name.capitalize())
    return names


def next_prime(n: int) -> int:
    """不小于n的最小素数"""
    candidate = max(2, n)
    while any(candidate % d == 0 for d in range(2, math.isqrt(candidate) + 1)):
        candidate += 1
    return candidate


def layout_sizes(num_queries: int, pool_size: int) -> Tuple[int, int]:
    """
    计算头实体桶数和桥实体每组桶数

    Returns:
        (头实体桶数h, 素数p)：C(h,2) >= 查询数，p*p >= 桥实体池
    """
    head_buckets = HEAD_TOKENS
    while math.comb(head_buckets, HEAD_TOKENS) < num_queries:
        head_buckets += 1
    line_width = next_prime(max(BRIDGE_TOKENS, math.isqrt(pool_size - 1) + 1))
    return head_buckets, line_width


def bridge_lines(groups: Sequence[Sequence[int]]) -> List[Tuple[int, ...]]:
    """
    桥实体的桶组合：第r组取下标 (a + r*b) mod p

    p为素数且组数不超过p时，任意两个组合至多共享一个桶
    """
    width = len(groups[0])
    return [
        tuple(group[(a + r * b) % width] for r, group in enumerate(groups))
        for a in range(width)
        for b in range(width)
    ]


class SynthGenerator:
    """
    合成数据生成器，结果只取决于规格

    固定词各占一桶，名称避开这些桶。头实体是一对头实体桶里的名称，每个实例的桶对互不相同；
    桥实体由3个名称组成，任意两个桥实体至多共享一个桶；答案和干扰文档名称不落在头实体桶里。
    静态和动态文档都以桥实体为标题。
    生成后仍用参考向量索引逐实例检查，不满足检索性质的实例换一个备用桶对重新生成
    """

    def __init__(self, spec: SynthSpec):
        self.spec = spec
        self.rng = random.Random(spec.seed)
        self.embedder = HashedEmbedder(spec.embedding_dim)
        self.relations: List[str] = []
        self.kinship: List[Tuple[str, str]] = []
        self._fixed_buckets: Set[int] = set()
        self._select_fixed_words()

        self._layout: Optional[BucketLayout] = None
        self._bridges: List[str] = []
        self._head_names: Dict[int, Deque[str]] = {}
        self._fillers: Deque[str] = deque()

    def _bucket(self, word: str) -> int:
        return self.embedder.bucket(word.lower())

    def _buckets(self, tokens: List[str]) -> Set[int]:
        return {self.embedder.bucket(token) for token in tokens}

    def _select_fixed_words(self):
        """
        挑出互不同桶的关系词、动词和称谓词

        疑问词和类别词只出现在查询里，文档中的固定词不能与它们同桶

        Raises:
            SynthSpecError: 当前维度下没有可用的关系词或称谓词
        """
        question_buckets = self._buckets(list(QUESTION_WORDS))
        doc_buckets: Set[int] = set()

        for relation in sorted(RELATIONS):
            relation_bucket, verb_bucket = self._bucket(relation), self._bucket(RELATIONS[relation])
            taken = question_buckets | doc_buckets
            if relation_bucket in taken or verb_bucket in taken or relation_bucket == verb_bucket:
                continue
            self.relations.append(relation)
            doc_buckets |= {relation_bucket, verb_bucket}

        category_buckets: Dict[str, int] = {}
        for category, kin in KINSHIP:
            category_bucket, kin_bucket = self._bucket(category), self._bucket(kin)
            taken = question_buckets | doc_buckets | set(category_buckets.values())
            if kin_bucket in taken or kin_bucket == category_bucket:
                continue
            if category not in category_buckets and category_bucket in doc_buckets:
                continue
            self.kinship.append((category, kin))
            doc_buckets.add(kin_bucket)
            category_buckets.setdefault(category, category_bucket)

        if not self.relations or not self.kinship:
            raise SynthSpecError("embedding_dim", f"维度 {self.spec.embedding_dim} 下固定词全部冲突")
        self._fixed_buckets = question_buckets | doc_buckets | set(category_buckets.values())

    def validate_spec(self) -> List[str]:
        """
        校验规格并返回打乱后的词表

        Raises:
            SynthSpecError: 桥实体池小于查询数、词表不足或超出可组合名称数、维度放不下头实体和桥实体
        """
        spec = self.spec
        if spec.pool_size < spec.num_queries:
            raise SynthSpecError(
                "bridge_entity_pool",
                f"桥实体池({spec.pool_size})必须不小于查询数({spec.num_queries})",
            )
        if spec.vocab_size < spec.required_names:
            raise SynthSpecError(
                "vocab_size",
                f"词表({spec.vocab_size})不足以保证不相交约束，至少需要 {spec.required_names} 个名称",
            )
        names = compose_names()
        if spec.vocab_size > len(names):
            raise SynthSpecError("vocab_size", f"词表({spec.vocab_size})超过可组合名称数({len(names)})")

        free_buckets = spec.embedding_dim - len(self._fixed_buckets)
        head_buckets, line_width = layout_sizes(spec.num_queries, spec.pool_size)
        needed = head_buckets + BRIDGE_TOKENS * line_width
        if needed > free_buckets:
            raise SynthSpecError(
                "embedding_dim",
                f"维度 {spec.embedding_dim} 下可用嵌入桶 {free_buckets} 个，"
                f"{spec.num_queries} 个查询和 {spec.pool_size} 个桥实体需要 {needed} 个",
            )

        self.rng.shuffle(names)
        return names[:spec.vocab_size]

    def _check_supply(self, by_bucket: Dict[int, Deque[str]], demand: Counter, role: str):
        for bucket in sorted(demand):
            available = len(by_bucket.get(bucket, ()))
            if available < demand[bucket]:
                raise SynthSpecError(
                    "vocab_size",
                    f"词表在嵌入桶 {bucket} 中只有 {available} 个名称，{role}需要 {demand[bucket]} 个",
                )

    def _prepare_vocabulary(self):
        """
        划分嵌入桶并预留全部名称

        名称最多的桶给头实体，其次给桥实体，所有非头实体桶的剩余名称作为答案和干扰名称。
        名称供给在生成任何实例之前检查完毕

        Raises:
            SynthSpecError: 规格不可满足
        """
        spec = self.spec
        vocabulary = self.validate_spec()
        by_bucket: Dict[int, Deque[str]] = {}
        for name in vocabulary:
            bucket = self._bucket(name)
            if bucket not in self._fixed_buckets:
                by_bucket.setdefault(bucket, deque()).append(name)

        free = [bucket for bucket in range(spec.embedding_dim) if bucket not in self._fixed_buckets]
        self.rng.shuffle(free)
        free.sort(key=lambda bucket: -len(by_bucket.get(bucket, ())))

        head_count, line_width = layout_sizes(spec.num_queries, spec.pool_size)
        head_buckets = sorted(free[:head_count])
        line_buckets = free[head_count:head_count + BRIDGE_TOKENS * line_width]

        pairs = list(combinations(head_buckets, HEAD_TOKENS))
        self.rng.shuffle(pairs)
        head_pairs = pairs[:spec.num_queries]
        self._check_supply(by_bucket, Counter(b for pair in head_pairs for b in pair), "头实体")

        groups = [line_buckets[r * line_width:(r + 1) * line_width] for r in range(BRIDGE_TOKENS)]
        lines = bridge_lines(groups)
        self.rng.shuffle(lines)
        lines = lines[:spec.pool_size]
        self._check_supply(by_bucket, Counter(b for line in lines for b in line), "桥实体")

        self._layout = BucketLayout(
            head_pairs=head_pairs,
            spare_pairs=deque(pairs[spec.num_queries:]),
            head_buckets=set(head_buckets),
        )

        pool = [" ".join(by_bucket[bucket].popleft() for bucket in line) for line in lines]
        self._bridges = self.rng.sample(pool, spec.num_queries)
        self._head_names = {bucket: by_bucket[bucket] for bucket in head_buckets if bucket in by_bucket}

        remaining: Set[str] = set()
        for bucket, names in by_bucket.items():
            if bucket not in self._layout.head_buckets:
                remaining.update(names)
        # 保持词表顺序
        self._fillers = deque(name for name in vocabulary if name in remaining)
        if len(self._fillers) < spec.filler_names:
            raise SynthSpecError(
                "vocab_size",
                f"头实体桶以外只剩 {len(self._fillers)} 个名称，答案和干扰文档需要 {spec.filler_names} 个",
            )

    def _draw_head(self, pair: Tuple[int, ...]) -> str:
        try:
            return " ".join(self._head_names[bucket].popleft() for bucket in pair)
        except (KeyError, IndexError):
            raise SynthSpecError("convergence", f"重新生成时嵌入桶 {pair} 的头实体名称已耗尽") from None

    def _next_name(self) -> str:
        try:
            return self._fillers.popleft()
        except IndexError:
            raise SynthSpecError("convergence", "重新生成时答案和干扰名称已耗尽") from None

    def build_instance(self, index: int) -> SynthInstance:
        """生成一个实例，头实体取该实例的桶对"""
        bridge = self._bridges[index]
        relation = self.rng.choice(self.relations)
        category, kin = self.rng.choice(self.kinship)
        verb = RELATIONS[relation]
        head = self._draw_head(self._layout.head_pairs[index])
        answer = self._next_name()

        prefix = f"syn-{index:05d}"
        distractors = []
        for j in range(self.spec.distractors_per_query):
            subject, obj = self._next_name(), self._next_name()
            distractors.append(Document(f"{prefix}-x{j}", subject, f"{subject} {relation} {obj}"))

        return SynthInstance(
            query_id=f"q{index:05d}",
            question=f"Who is the {relation} of the {category} of {head}?",
            answer=answer,
            head=head,
            bridge=bridge,
            relation=relation,
            category=category,
            kin=kin,
            stat=Document(f"{prefix}-stat", bridge, f"{head} {kin} {bridge}"),
            dyn=Document(f"{prefix}-dyn", bridge, f"{bridge} {verb} {answer}"),
            distractors=distractors,
        )

    def rebuild_instance(self, index: int) -> SynthInstance:
        """
        换一个备用桶对重新生成实例

        Raises:
            SynthSpecError: 备用桶对已用完
        """
        if not self._layout.spare_pairs:
            raise SynthSpecError("convergence", f"实例 {index} 需要重新生成，但备用头实体桶对已用完")
        self._layout.head_pairs[index] = self._layout.spare_pairs.popleft()
        return self.build_instance(index)

    def verify(self, instances: List[SynthInstance]) -> List[int]:
        """
        用参考向量索引检查每个实例

        Returns:
            需要重新生成的实例下标：不满足检索性质的实例，以及排在期望文档之前的文档所属实例
        """
        corpus = CorpusHandle.from_documents(doc for instance in instances for doc in instance.documents)
        index = VectorIndex.build(corpus, self.embedder)
        owner: Dict[str, int] = {
            doc.doc_id: i for i, instance in enumerate(instances) for doc in instance.documents
        }

        rebuild: Set[int] = set()
        for i, instance in enumerate(instances):
            top2 = [doc.doc_id for doc in index.retrieve(instance.question, 2)]
            if not top2 or top2[0] != instance.stat.doc_id:
                rebuild.add(i)
                rebuild.update(owner[doc_id] for doc_id in top2[:1])
                continue
            if self.spec.distractors_per_query >= 1 and instance.dyn.doc_id in top2:
                rebuild.add(i)
                continue

            expanded = index.retrieve(concat_query(instance.question, instance.stat), 2)
            second = [doc.doc_id for doc in expanded if doc.doc_id != instance.stat.doc_id]
            if not second or second[0] != instance.dyn.doc_id:
                rebuild.add(i)
                rebuild.update(owner[doc_id] for doc_id in second[:1])
        return sorted(rebuild)

    def generate(self) -> SynthResult:
        """
        生成全部实例，不满足检索性质的实例重新生成

        Raises:
            SynthSpecError: 规格不可满足或修复不收敛
        """
        self._prepare_vocabulary()
        instances = [self.build_instance(i) for i in range(self.spec.num_queries)]

        for round_number in range(MAX_REPAIR_ROUNDS + 1):
            failing = self.verify(instances)
            if not failing:
                assert_disjointness(instances)
                logger.info(
                    f"合成数据生成完成: {len(instances)} 个查询, "
                    f"{len(instances) * (2 + self.spec.distractors_per_query)} 篇文档, 修复 {round_number} 轮"
                )
                return SynthResult(spec=self.spec, instances=instances, repair_rounds=round_number)

            logger.debug(f"第 {round_number + 1} 轮修复: {len(failing)} 个实例")
            for i in failing:
                instances[i] = self.rebuild_instance(i)

        raise SynthSpecError("convergence", f"{MAX_REPAIR_ROUNDS} 轮修复后仍有实例不满足检索性质")


def assert_disjointness(instances: List[SynthInstance]):
    """
    事后检查构造约束：动态文档与查询不共享token，且与静态文档共享完整的桥实体

    Raises:
        SynthSpecError: 任一实例违反约束
    """
    for instance in instances:
        query_tokens = set(tokenize(instance.question))
        dyn_tokens = set(tokenize(instance.dyn.searchable_text))
        stat_tokens = set(tokenize(instance.stat.searchable_text))
        bridge_tokens = set(tokenize(instance.bridge))

        if dyn_tokens & query_tokens:
            raise SynthSpecError("disjointness", f"{instance.query_id} 的动态文档与查询共享token")
        if not bridge_tokens or not bridge_tokens <= dyn_tokens & stat_tokens:
            raise SynthSpecError("bridge", f"{instance.query_id} 的静态与动态文档没有共享桥实体")


def generate(spec: SynthSpec) -> SynthResult:
    """按规格生成合成数据"""
    return SynthGenerator(spec).generate()


def write_synth(result: SynthResult, corpus_path: PathLike, dataset_path: PathLike, force: bool = False):
    """写出语料和数据集JSONL"""
    ensure_writable(corpus_path, force)
    ensure_writable(dataset_path, force)
    doc_count = write_jsonl(corpus_path, result.corpus_records(), force=True)
    query_count = write_jsonl(dataset_path, result.dataset_records(), force=True)
    logger.info(f"已写出 {corpus_path} ({doc_count} 篇文档) 和 {dataset_path} ({query_count} 个查询)")
