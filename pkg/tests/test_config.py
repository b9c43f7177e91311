import numpy as np
import pytest

from chemoflow.config import ConfigError, parse_config, reference_config_text, validate_config
from chemoflow.grid import integrate
from chemoflow.model import PorousMedium, TabulatedDiffusion
from chemoflow.operators import div

MINIMAL = """\
[grid]
nx = 16
ny = 16
lx = 1.0
ly = 1.0

[model]
diffusion = porous_medium
m = 2.0
gamma = 0.5
epsilon = 0.1
l = 1.0
m_bound = 2.0

[initial]
n0 = constant: value=1.0
c0 = constant: value=1.0
u0 = zero

[time]
t_end = 0.1
"""


class TestParse:
    def test_minimal_valid(self):
        cfg = parse_config(MINIMAL)
        assert cfg.grid.nx == 16
        assert isinstance(cfg.spec.diffusion, PorousMedium)
        assert cfg.spec.gamma == 0.5
        assert cfg.controls.t_end == 0.1
        assert cfg.cadence == 0.05  # default

    def test_reference_text_valid(self):
        cfg = parse_config(reference_config_text(t_end=0.2))
        assert cfg.grid.nx == 64
        assert cfg.spec.M == 1.5

    def test_gamma_too_large(self):
        with pytest.raises(ConfigError, match=r"\[0, 5/6\]"):
            parse_config(reference_config_text(gamma=0.9))

    def test_large_gamma_needs_mass_bound(self):
        text = reference_config_text(gamma=0.7, n0="gaussian: mass=2.0, sigma=0.15")
        with pytest.raises(ConfigError, match="n0"):
            parse_config(text)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(MINIMAL + "\n[output]\nwibble = 3\n")

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config(MINIMAL + "\n[physics]\nx = 1\n")

    def test_parse_error_carries_line(self):
        with pytest.raises(ConfigError, match="line"):
            parse_config("[grid\nnx = 4\n")

    def test_epsilon_out_of_range_for_run(self):
        with pytest.raises(ConfigError, match="epsilon"):
            parse_config(MINIMAL.replace("epsilon = 0.1", "epsilon = 0.0"))

    def test_m_above_two_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(MINIMAL.replace("m = 2.0", "m = 2.5"))

    def test_signal_bound_checked(self):
        bad = MINIMAL.replace("c0 = constant: value=1.0", "c0 = constant: value=5.0")
        with pytest.raises(ConfigError, match="c0"):
            parse_config(bad)

    def test_tabulated_diffusion(self):
        text = MINIMAL.replace(
            "diffusion = porous_medium\nm = 2.0",
            "diffusion = tabulated\ntable_knots = 0, 1, 10\ntable_values = 2, 2, 2",
        )
        cfg = parse_config(text)
        assert isinstance(cfg.spec.diffusion, TabulatedDiffusion)

    def test_threshold_failure_named(self):
        text = MINIMAL.replace(
            "diffusion = porous_medium\nm = 2.0",
            "diffusion = tabulated\ntable_knots = 0, 10\ntable_values = 0.5, 0.5",
        )
        with pytest.raises(ConfigError, match="threshold"):
            parse_config(text)


class TestInitialData:
    def test_gaussian_mass_exact(self):
        cfg = parse_config(reference_config_text(t_end=0.1))
        state = cfg.initial_state()
        assert integrate(state.n) == pytest.approx(1.0, abs=1e-14)
        assert state.n.values.min() >= 0.0

    def test_cosine_signal(self):
        cfg = parse_config(reference_config_text(t_end=0.1))
        state = cfg.initial_state()
        assert state.c.values.max() <= 1.5
        assert state.c.values.min() > 0.4

    def test_vortex_solenoidal(self):
        cfg = parse_config(reference_config_text(t_end=0.1, u0="vortex: amp=0.2, kx=1, ky=1"))
        state = cfg.initial_state()
        assert np.abs(div(state.u).values).max() < 1e-12
        assert state.u.normal_boundary_is_zero()

    def test_unknown_kind(self):
        with pytest.raises(ConfigError, match="unknown scalar initial"):
            parse_config(MINIMAL.replace("n0 = constant: value=1.0", "n0 = blob: q=1"))

    def test_unknown_catalogue_parameter(self):
        with pytest.raises(ConfigError, match="unknown parameters"):
            parse_config(MINIMAL.replace("n0 = constant: value=1.0", "n0 = constant: mass=1"))


class TestValidateList:
    def test_collects_multiple_violations(self):
        cfg = parse_config(MINIMAL)
        bad = cfg.__class__(**{**cfg.__dict__, "c0_kind": "constant: value=9.0"})
        problems = validate_config(bad)
        assert any("c0" in p for p in problems)
