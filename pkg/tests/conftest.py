import pytest
import torch
from hypothesis import settings

from neuscrape import ModelConfig, NeuScraperModel, TokenizerConfig

settings.register_profile("default", deadline=None)
settings.load_profile("default")

torch.set_num_threads(1)

SMALL = ModelConfig(d_node=16, d_model=16, n_layers=2, n_heads=4, max_nodes=32, node_heads=2)
SMALL_TOK = TokenizerConfig(vocab_size=257, t_max=12)


@pytest.fixture
def small_model():
    torch.manual_seed(1234)
    return NeuScraperModel(SMALL, SMALL_TOK).eval()


ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or rep.when != "call" and not (rep.when == "setup" and rep.outcome != "passed"):
        return
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if not detail and getattr(item, "obj", None) is not None and item.obj.__doc__:
        detail = item.obj.__doc__.strip().splitlines()[0]
    if rep.outcome != "passed" and not detail:
        detail = str(rep.longrepr).strip().splitlines()[-1][:200]
    ACCEPTANCE_RESULTS[marker.args[0]] = ("PASS" if rep.outcome == "passed" else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        status, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {detail}")
