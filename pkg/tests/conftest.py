import pytest

from dejean_growth.language_graph import quotient_for
from dejean_growth.spectral import perron_certificate
from dejean_growth.words import AlphabetParams


@pytest.fixture(scope="session")
def k5():
    return AlphabetParams(5)


@pytest.fixture(scope="session")
def q56(k5):
    return quotient_for(k5, 6)


@pytest.fixture(scope="session")
def x56(q56):
    cert = perron_certificate(q56)
    return cert, [int(x * 2 ** 48) for x in cert.x_hat]


@pytest.fixture(scope="session")
def q818():
    return quotient_for(AlphabetParams(8), 18)


# reduced-parameter run at k=8, m=18 (bounded-length chain from n0 up to the induction start)
K8_RUN = dict(k=8, m=18, p1=41, p2=300, n0=55, mode="truncated")


@pytest.fixture(scope="session")
def k8_run(tmp_path_factory):
    from dejean_growth.pipeline import PipelineConfig, run_pipeline

    root = tmp_path_factory.mktemp("k8")
    cfg = PipelineConfig(**K8_RUN, threads=1, cache_dir=str(root / "cache"),
                         out=str(root / "cert.txt"))
    return run_pipeline(cfg)
