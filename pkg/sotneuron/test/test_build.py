import pytest
import sotneuron

def test_build(request):
    expect_build = request.config.getoption('is_build')
    if not expect_build:
        assert sotneuron.version == '0.0.0.UNKNOWN'
    else:
        assert sotneuron.version != '0.0.0.UNKNOWN'
