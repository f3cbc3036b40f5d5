def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running statistical or sweep tests")
    config.addinivalue_line(
        "markers", "acceptance: criteria gate (run via tests/test_acceptance.py)"
    )
