"""
pytest配置文件
"""
import pytest


def pytest_addoption(parser):
    """添加pytest命令行选项"""
    parser.addoption(
        "--skip-acceptance",
        action="store_true",
        default=False,
        help="跳过合成数据上的验收测试"
    )


def pytest_configure(config):
    """pytest配置"""
    config.addinivalue_line(
        "markers", "acceptance: 标记合成数据上的验收测试"
    )


def pytest_collection_modifyitems(config, items):
    """修改测试项收集"""
    if not config.getoption("--skip-acceptance"):
        return

    skip_acceptance = pytest.mark.skip(reason="指定了 --skip-acceptance")
    for item in items:
        if "acceptance" in item.keywords:
            item.add_marker(skip_acceptance)
