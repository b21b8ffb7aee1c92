import pytest

from liquidrank import MarketConfig, ReputationParams

# criterion label -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE = {}


@pytest.fixture
def small_config():
    return MarketConfig(n_agents=60, n_goods=3, n_days=12, supplier_share=0.3,
                        scam_supplier_count=2, scam_rater_count=5, strategy="roulette",
                        reputation_params=ReputationParams(conservatism=0.5, decay_value=0.2),
                        seed=7)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0].lstrip("C"))):
        ok, detail = ACCEPTANCE[label]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
