"""
批量运行器测试
"""

import pytest

from src import plugins  # noqa: F401
from src.core.batch_runner import BatchRunner
from src.core.errors import ClassifierTransportError, QueryFailedError
from src.schemas.pipeline import PipelineConfig
from src.services.dataset import load_dataset
from src.services.index_store import build_indexes
from src.utils.clock import ClockMode, FrozenClock


@pytest.fixture
def bundle(heiberg_corpus, settings):
    return build_indexes(heiberg_corpus, settings)


@pytest.fixture
def dataset(dataset_file):
    return list(reversed(load_dataset(dataset_file)))


class TestBatchRunner:
    """批量运行器测试"""

    @pytest.mark.asyncio
    async def test_rows_sorted_by_query_id(self, bundle, dataset, settings):
        runner = BatchRunner(bundle, PipelineConfig(strategy="sm", k=2), "mock", settings=settings, jobs=2)

        rows = await runner.run(dataset)

        assert [row["query_id"] for row in rows] == ["q1", "q2"]
        assert runner.summary.succeeded == 2
        assert runner.summary.success_rate == 1.0
        assert all(row["status"] == "ok" and "error" not in row for row in rows)

    @pytest.mark.asyncio
    async def test_one_llm_call_per_query(self, bundle, dataset, settings):
        runner = BatchRunner(
            bundle, PipelineConfig(strategy="cis", k=4), "mock", "constant:positive", settings=settings,
        )

        rows = await runner.run(dataset)

        assert runner.llm.call_count == len(dataset)
        assert all(row["llm_calls"] == 1 for row in rows)
        assert all(row["trace"]["llm_calls"] == 1 for row in rows)

    def test_clock_follows_backends(self, bundle, settings):
        runner = BatchRunner(bundle, PipelineConfig(strategy="cfs", k=2), "mock", "lexical", settings=settings)
        runner.load_backends()
        assert runner.hermetic
        assert isinstance(runner.build_pipeline().clock, FrozenClock)

        remote = BatchRunner(
            bundle, PipelineConfig(strategy="cfs", k=2), "mock", "http://localhost:9000", settings=settings,
        )
        remote.load_backends()
        assert not remote.hermetic
        assert not remote.build_pipeline().clock.frozen

        frozen = BatchRunner(
            bundle, PipelineConfig(strategy="cfs", k=2), "mock", "http://localhost:9000",
            settings=settings, clock_mode=ClockMode.FROZEN,
        )
        frozen.load_backends()
        assert frozen.build_pipeline().clock.frozen

    @pytest.mark.asyncio
    async def test_failure_aborts_by_default(self, bundle, dataset, settings, mocker):
        runner = BatchRunner(bundle, PipelineConfig(strategy="cfs", k=4), "mock", "lexical", settings=settings)
        runner.load_backends()
        mocker.patch.object(runner.classifier, "score", side_effect=ClassifierTransportError("down"))
        close = mocker.spy(runner.llm, "close")

        with pytest.raises(QueryFailedError):
            await runner.run(dataset)

        assert close.call_count == 1

    @pytest.mark.asyncio
    async def test_keep_going_records_errors(self, bundle, dataset, settings, mocker):
        runner = BatchRunner(
            bundle, PipelineConfig(strategy="cfs", k=4), "mock", "lexical", settings=settings, keep_going=True,
        )
        runner.load_backends()
        mocker.patch.object(runner.classifier, "score", side_effect=ClassifierTransportError("down"))

        rows = await runner.run(dataset)

        assert runner.summary.failed == 2
        assert [row["status"] for row in rows] == ["error", "error"]
        assert all("down" in row["error"] for row in rows)
