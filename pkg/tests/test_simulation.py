import numpy as np
import pytest
from scipy.optimize import curve_fit
from scipy.signal import welch

from src.core.emitter import DriveCondition, Emitter, power_broadened_hwhm, rf_rate
from src.core.errors import ChannelCountError, DecodeError, ValidationError
from src.core.mechanics import MechMode, thermal_rms, zero_point
from src.simulation.brownian import propagate_free, simulate_displacement
from src.simulation.detector import DetectorModel, apply_detector, dead_time_filter, hbt_split
from src.simulation.g2_model import blinking_factor, g2_model, g2_two_level, mechanical_contrast
from src.simulation.photons import (
    PS_PER_S,
    BlinkingModel,
    PhotonTags,
    bin_tags,
    generate_photons,
    telegraph_switch_times,
)
from src.simulation.rng import RandomStreams
from src.simulation.simulator import SimConfig, detuning_trace, run_simulation
from src.simulation.tag_files import (
    read_tags,
    read_trace_csv,
    write_tags_binary,
    write_tags_csv,
    write_trace_csv,
)

TWO_PI = 2.0 * np.pi
ALWAYS_ON = BlinkingModel(on_fraction=1.0)


def poisson_tags(rate, duration, seed):
    rng = np.random.default_rng(seed)
    n = rng.poisson(rate * duration)
    times = np.unique(np.rint(np.sort(rng.random(n)) * duration * PS_PER_S).astype(np.int64))
    return PhotonTags(times, np.zeros(times.size, np.uint8), int(round(duration * PS_PER_S)))


def test_streams_are_independent_and_reproducible():
    a = RandomStreams(7).generator("thinning").random(5)
    b = RandomStreams(7).generator("thinning").random(5)
    c = RandomStreams(7).generator("blinking").random(5)
    d = RandomStreams(8).generator("thinning").random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c) and not np.allclose(a, d)
    assert not np.allclose(RandomStreams(7).generator("mechanics", 0).random(3),
                           RandomStreams(7).generator("mechanics", 1).random(3))
    with pytest.raises(ValidationError):
        RandomStreams(7).generator("afterpulsing")
    with pytest.raises(ValidationError):
        RandomStreams(-1)


def test_zero_temperature_trajectory_is_zero(f1x):
    u = simulate_displacement(f1x, 0.0, 1e-3, 1e-8, seed=1)
    assert u.shape == (100000,)
    assert not u.any()


def test_time_step_validation(f1x):
    with pytest.raises(ValidationError):
        simulate_displacement(f1x, 4.0, 1e-3, 1e-7, seed=1)


@pytest.mark.slow
def test_displacement_variance_and_spectrum(f1x):
    duration, dt = 0.5, 2e-8
    u = simulate_displacement(f1x, 4.0, duration, dt, seed=11)
    u_th = thermal_rms(f1x, 4.0)
    # 0.5 s is about 320 correlation times 2 / gamma_m
    stderr = u_th ** 2 * np.sqrt(2.0 / (f1x.gamma_m * duration))
    assert abs(u.var() - u_th ** 2) < 3 * stderr
    half = u.size // 2
    var_a, var_b = u[:half].var(), u[half:].var()
    assert abs(var_a - var_b) < 3 * np.sqrt(2) * u_th ** 2 * np.sqrt(4.0 / (f1x.gamma_m * duration))
    freq, psd = welch(u[::5], fs=1 / (5 * dt), nperseg=2 ** 18)
    assert abs(freq[np.argmax(psd)] - f1x.freq_hz) < f1x.gamma_m / TWO_PI


@pytest.mark.slow
def test_displacement_linewidth():
    mode = MechMode("S", "flexural-x", 1, omega_m=TWO_PI * 100e3, gamma_m=TWO_PI * 2e3, m_eff=1e-14)
    dt = 2.5e-7
    u = simulate_displacement(mode, 4.0, 2.0, dt, seed=3)
    freq, psd = welch(u, fs=1 / dt, nperseg=2 ** 16)
    band = (freq > 80e3) & (freq < 120e3)

    def lorentz(f, a, f0, w):
        return a / ((f ** 2 - f0 ** 2) ** 2 + (w * f) ** 2)

    guess = (psd[band].max() * (2e3 * 100e3) ** 2, 100e3, 2e3)
    (a, f0, w), _ = curve_fit(lorentz, freq[band], psd[band], p0=guess)
    assert abs(w) == pytest.approx(2e3, rel=0.1)
    assert f0 == pytest.approx(100e3, rel=0.01)


def test_free_propagation_conserves_amplitude():
    mode = MechMode("L", "breathing", 1, omega_m=TWO_PI * 1e6, gamma_m=TWO_PI * 1e-6, m_eff=1e-14)
    x, v = propagate_free(mode, 1e-12, 0.0, 1e-8, 100001)
    amplitude = np.sqrt(x ** 2 + (v / mode.omega_m) ** 2)
    np.testing.assert_allclose(amplitude, 1e-12, rtol=1e-6)


def test_detuning_trace_linearity(f1x, f1y):
    ua = np.linspace(-1e-11, 1e-11, 50)
    ub = np.cos(np.linspace(0, 3, 50)) * 1e-11
    both = detuning_trace([ua, ub], [f1x, f1y], [1e6, 2e5])
    single = detuning_trace([ua], [f1x], [1e6]) + detuning_trace([ub], [f1y], [2e5])
    np.testing.assert_allclose(both, single)
    assert not detuning_trace([ua], [f1x], [0.0]).any()
    constant = detuning_trace([np.full(3, thermal_rms(f1x, 4.0))], [f1x], [1e6])
    np.testing.assert_allclose(constant, 1e6 * thermal_rms(f1x, 4.0) / zero_point(f1x))
    with pytest.raises(ValidationError):
        detuning_trace([ua, ub[:10]], [f1x, f1y], [1.0, 1.0])


def test_homogeneous_emission_is_poissonian():
    e = Emitter(1e9)
    drive = DriveCondition(1e9, float(power_broadened_hwhm(e, 1e9)))
    eps = 0.01
    tags = generate_photons(np.zeros(200000), 1e-7, e, drive, eps, ALWAYS_ON, seed=5)
    expected = eps * rf_rate(e, drive) * 0.02
    assert abs(len(tags) - expected) < 3 * np.sqrt(expected)
    counts = bin_tags(tags, 1e-5).counts
    dispersion = counts.var(ddof=1) / counts.mean()
    assert abs(dispersion - 1.0) < 3 * np.sqrt(2.0 / (counts.size - 1))


def test_blinking_mean_rate():
    e = Emitter(1e9)
    drive = DriveCondition(1e9, 0.0)
    blinking = BlinkingModel(0.1, 1e-6)
    tags = generate_photons(np.zeros(100000), 1e-6, e, drive, 0.002, blinking, seed=9)
    expected = 0.002 * 0.1 * rf_rate(e, drive) * 0.1
    assert len(tags) == pytest.approx(expected, rel=0.06)


def test_telegraph_statistics():
    blinking = BlinkingModel(0.25, 1e-6)
    rng = np.random.default_rng(0)
    realization = telegraph_switch_times(blinking, 0.2, rng=rng)
    t = np.arange(0, 0.2, 1e-7)
    state = realization.state_at(t)
    assert state.mean() == pytest.approx(0.25, abs=0.01)
    lag = 10
    corr = np.mean(state[:-lag] * state[lag:]) / state.mean() ** 2
    assert corr == pytest.approx(1 + 3 * np.exp(-1.0), rel=0.05)
    assert telegraph_switch_times(ALWAYS_ON, 1.0, rng=rng).state_at([0.5])[0]


def test_dead_time_filter_is_non_paralyzable():
    times = np.array([0, 50, 90, 120, 260, 300, 399, 400], dtype=np.int64)
    keep = dead_time_filter(times, 100)
    np.testing.assert_array_equal(times[keep], [0, 120, 260, 399])


def test_detector_identity_and_dead_time_rate():
    tags = poisson_tags(5e6, 0.02, 1)
    same = apply_detector(tags, DetectorModel(0.0, 0.0), seed=1)
    assert same.identical_to(tags)
    dead = 100e-9
    out = apply_detector(tags, DetectorModel(0.0, dead), seed=1)
    rate = tags.mean_rate
    assert out.mean_rate == pytest.approx(rate / (1 + rate * dead), rel=0.01)
    assert np.all(np.diff(out.times_ps) >= int(dead * PS_PER_S))
    counts = bin_tags(out, 1e-5).counts
    fano = counts.var(ddof=1) / counts.mean()
    assert fano == pytest.approx(1 / (1 + rate * dead) ** 2, rel=0.1)
    assert DetectorModel(dead_time=dead).cutoff_frequency == pytest.approx(10e6)


def test_jitter_keeps_tags_inside_record():
    tags = poisson_tags(1e6, 0.01, 2)
    out = apply_detector(tags, DetectorModel(500e-12, 0.0), seed=4)
    assert len(out) >= len(tags) - 5
    assert out.times_ps.min() >= 0 and out.times_ps.max() <= out.duration_ps
    shift = out.times_ps[:1000] - tags.times_ps[:1000]
    assert np.std(shift) == pytest.approx(500.0, rel=0.15)


def test_hbt_split_conserves_events():
    tags = poisson_tags(1e6, 0.01, 3)
    split = hbt_split(tags, seed=2)
    n = len(tags)
    assert len(split) == n and split.n_channels == 2
    n0 = np.count_nonzero(split.channels == 0)
    assert abs(n0 - n / 2) < 5 * np.sqrt(n / 4)
    with pytest.raises(ChannelCountError):
        hbt_split(split, seed=2)


def test_bin_tags_drops_partial_last_bin():
    tags = poisson_tags(1e5, 0.0105, 4)
    trace = bin_tags(tags, 1e-3)
    assert len(trace) == 10
    assert trace.duration == pytest.approx(0.010)
    assert trace.counts.sum() == np.count_nonzero(tags.times_ps < 10 ** 10)
    exact = bin_tags(tags, 0.5e-3)
    assert len(exact) == 21
    assert exact.counts.sum() == np.count_nonzero(tags.times_ps < tags.duration_ps)
    with pytest.raises(ValidationError):
        bin_tags(tags, 0.02)


def test_g2_two_level_limits():
    tau = np.linspace(-50e-9, 50e-9, 1001)
    g2 = g2_two_level(tau, 1e9, 1e9)
    assert g2[500] == pytest.approx(0.0, abs=1e-12)
    assert g2[0] == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_allclose(g2, g2[::-1])
    weak = g2_two_level(tau, 1e9, 1e8)
    critical = g2_two_level(tau, 1e9, 0.25e9)
    assert weak[500] == pytest.approx(0.0, abs=1e-12) and critical[500] == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.isfinite(weak)) and weak.max() < 1.0 + 1e-9


def test_g2_model_limits(b2):
    e = Emitter(1.1e9)
    drive = DriveCondition(1.1e9, 1e9)
    blink = BlinkingModel(0.1, 100e-9)
    assert g2_model(np.array([0.0]), e, drive, blink)[0] == pytest.approx(0.0, abs=1e-12)
    assert g2_model(np.array([50e-6]), e, drive, blink)[0] == pytest.approx(1.0, abs=1e-9)
    assert blinking_factor(0.0, blink) == pytest.approx(10.0)
    tau = np.arange(0.25e-6, 8e-6, 0.5e-9)
    g2 = g2_model(tau, e, drive, ALWAYS_ON, modes=[(b2, TWO_PI * 3.6e6)], temperature=4.0)
    spectrum = np.abs(np.fft.rfft(g2 - g2.mean()))
    freq = np.fft.rfftfreq(tau.size, 0.5e-9)
    period = 1 / freq[np.argmax(spectrum)]
    assert 25e-9 <= period <= 28e-9
    contrast = mechanical_contrast(e, drive, b2, TWO_PI * 3.6e6, 4.0)
    late = np.abs(g2[tau > 7e-6] - 1).max()
    assert late == pytest.approx(contrast * np.exp(-0.5 * b2.gamma_m * 7e-6), rel=0.02)


def test_g2_model_jitter_smooths_dip():
    e = Emitter(1e9)
    drive = DriveCondition(1e9, 0.0)
    tau = np.arange(-20e-9, 20e-9, 50e-12)
    ideal = g2_model(tau, e, drive, ALWAYS_ON)
    blurred = g2_model(tau, e, drive, ALWAYS_ON, jitter_sigma=500e-12)
    zero = np.argmin(np.abs(tau))
    assert blurred[zero] > ideal[zero] + 0.05
    with pytest.raises(ValidationError):
        g2_model(np.array([0.0, 1e-9, 3e-9]), e, drive, ALWAYS_ON, jitter_sigma=1e-10)


def small_config(f1x, **overrides):
    values = dict(
        modes=((f1x, TWO_PI * 280e3),),
        emitter=Emitter(1e9, 2e8),
        drive=DriveCondition(1e9, 7e8),
        efficiency=0.01,
        blinking=BlinkingModel(0.5, 1e-6),
        detector=DetectorModel(500e-12, 100e-9, channels=2),
        duration=2e-3,
        dt=5e-8,
        seed=42,
    )
    values.update(overrides)
    return SimConfig(**values)


def test_simulation_is_deterministic(f1x):
    first = run_simulation(small_config(f1x))
    second = run_simulation(small_config(f1x))
    assert first.tags.identical_to(second.tags)
    assert first.tags.digest == second.tags.digest != ""
    other = run_simulation(small_config(f1x, seed=43))
    assert not other.tags.identical_to(first.tags)
    assert set(np.unique(first.tags.channels)) == {0, 1}


def test_simulation_drives_emitter_with_detuning_trace(f1x, f1y):
    cfg = small_config(f1x, modes=((f1x, TWO_PI * 280e3), (f1y, 0.0)))
    result = run_simulation(cfg)
    streams = RandomStreams(cfg.seed)
    u = simulate_displacement(f1x, cfg.temperature, cfg.duration, cfg.dt, rng=streams.generator("mechanics", 0))
    shift = detuning_trace([u[:cfg.n_samples]], [f1x], [TWO_PI * 280e3])
    assert result.detuning_rms == pytest.approx(np.sqrt(np.mean(shift ** 2)), rel=1e-12)
    still = run_simulation(small_config(f1x, modes=((f1x, 0.0),)))
    assert still.detuning_rms == 0.0


def test_sim_config_validation(f1x):
    with pytest.raises(ValidationError):
        small_config(f1x, dt=1e-7)
    with pytest.raises(ValidationError):
        small_config(f1x, duration=1e-4)
    with pytest.raises(ValidationError):
        small_config(f1x, duration=0.0)
    with pytest.raises(ValidationError):
        small_config(f1x, seed=2 ** 64)


def test_tag_files_round_trip(tmp_path, f1x):
    tags = run_simulation(small_config(f1x)).tags
    binary = write_tags_binary(tags, tmp_path / "tags.ptag")
    csv = write_tags_csv(tags, tmp_path / "tags.csv")
    assert read_tags(binary).identical_to(tags)
    assert read_tags(csv).identical_to(tags)
    assert read_tags(binary).digest == tags.digest
    trace = bin_tags(tags, 1e-6)
    back = read_trace_csv(write_trace_csv(trace, tmp_path / "trace.csv"))
    np.testing.assert_array_equal(back.counts, trace.counts)
    assert back.bin_width == pytest.approx(trace.bin_width)


def test_tag_file_decode_errors(tmp_path):
    junk = tmp_path / "junk.bin"
    junk.write_bytes(b"JUNKJUNKJUNK")
    with pytest.raises(DecodeError):
        read_tags(junk)
    truncated = tmp_path / "short.ptag"
    truncated.write_bytes(b"PTAG\x01\x00")
    with pytest.raises(DecodeError):
        read_tags(truncated)
    trace_csv = tmp_path / "trace.csv"
    trace_csv.write_text('# format: "TRACE-CSV"\nbin_start_s,counts\n0,1\n')
    with pytest.raises(DecodeError):
        read_tags(trace_csv)


def test_trace_csv_with_bad_counts(tmp_path):
    path = tmp_path / "trace.csv"
    path.write_text('# format: "TRACE-CSV"\n# bin_width_s: 1e-06\nbin_start_s,counts\n0,1\n1e-06,many\n')
    with pytest.raises(DecodeError):
        read_trace_csv(path)
    path.write_text('# format: "TRACE-CSV"\n# bin_width_s: 1e-06\nbin_start_s,counts\n0,1\n1e-06,\n')
    with pytest.raises(DecodeError):
        read_trace_csv(path)
