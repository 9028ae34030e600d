import streamlit as st
import pandas as pd
import numpy as np
import json
import logging

from detection_algorithms import ENERGY, create_detection_algorithms, energy_dof
from experiment_harness import ExperimentConfig, empirical_risk, format_rho_star, load_presets, table2_sweep
from harmonics.errors import HarmonicsError
from harmonics.frequencies import random_spec, sample_signal
from harmonics.nuisance import EPS_SET, SUBSPACE, ZERO, NuisanceSpec
from lemma_verification import SUITE_SCALES, run_all_suites
from utils.noise import gaussian_noise, substream
from utils.persistence import read_observation_table, records_to_csv
from utils.quantiles import FORMULA_BOUND, MONTE_CARLO, USER_SUPPLIED, ThresholdTable, chi2_quantile, q_bound

logger = logging.getLogger(__name__)

st.set_page_config(page_title="Harmonic Oscillation Detection", layout="wide")

# Thresholds survive reruns so Monte Carlo quantiles are simulated once per session
if 'threshold_table' not in st.session_state:
    st.session_state.threshold_table = ThresholdTable()

# Sidebar Configuration
st.sidebar.title("🔧 Configuration")
st.sidebar.markdown("---")

st.sidebar.markdown("### Test Settings")
alpha = st.sidebar.number_input("Risk level α", min_value=0.001, max_value=0.2, value=0.01, step=0.005,
                                format="%.3f", help="False-alarm probability of both tests")
threshold_method = st.sidebar.selectbox(
    "Basic-test threshold",
    [MONTE_CARLO, FORMULA_BOUND, USER_SUPPLIED],
    format_func=lambda m: {MONTE_CARLO: "Monte Carlo", FORMULA_BOUND: "Analytic bound",
                           USER_SUPPLIED: "User supplied"}[m],
)
threshold_trials = st.sidebar.number_input("Monte Carlo trials", min_value=1000, max_value=1000000,
                                           value=20000, step=1000)
seed = int(st.sidebar.number_input("Seed", min_value=0, value=1, step=1))
user_threshold = None
if threshold_method == USER_SUPPLIED:
    user_threshold = st.sidebar.number_input("Threshold", min_value=0.01, value=3.5, step=0.1)

st.sidebar.markdown("---")
st.sidebar.markdown("### Nuisance")
nuisance_kind = st.sidebar.selectbox("Nuisance set", [ZERO, SUBSPACE, EPS_SET],
                                     format_func=lambda k: {ZERO: "None", SUBSPACE: "Harmonic subspace",
                                                            EPS_SET: "ε-approximate harmonics"}[k])
nuisance_freqs = []
nuisance_eps = 0.0
if nuisance_kind != ZERO:
    freq_text = st.sidebar.text_input("Frequencies (radians, comma separated)", "0.3, -0.3",
                                      help="Must be closed under negation modulo 2π")
    try:
        nuisance_freqs = [float(v) for v in freq_text.split(",") if v.strip()]
    except ValueError:
        st.sidebar.error("❌ Frequencies must be numbers")
if nuisance_kind == EPS_SET:
    nuisance_eps = st.sidebar.number_input("ε", min_value=0.0, value=0.01, step=0.005, format="%.4f")

st.sidebar.markdown("---")
st.sidebar.markdown("### 📚 About")
st.sidebar.markdown("""
**Harmonic Detection Toolkit**

- Basic test: uniform Fourier distance to the nuisance set
- Energy test: least-squares residual against χ²
- Certified decisions from primal and dual bounds
""")


def build_nuisance():
    """NuisanceSpec from the sidebar, or None after showing the error."""
    try:
        if nuisance_kind == ZERO:
            return NuisanceSpec.zero()
        if nuisance_kind == SUBSPACE:
            return NuisanceSpec.subspace(nuisance_freqs)
        return NuisanceSpec.eps_set(nuisance_freqs, nuisance_eps)
    except HarmonicsError as e:
        st.error(f"❌ Invalid nuisance: {e}")
        return None


def detection_params():
    return {
        'alpha': alpha,
        'threshold_method': threshold_method,
        'threshold_trials': int(threshold_trials),
        'threshold_seed': seed,
        'threshold': user_threshold,
    }


def show_detection():
    st.header("📊 Run the Tests")
    source = st.radio("Observation", ["Upload", "Synthetic"], horizontal=True)
    y = None
    if source == "Upload":
        uploaded_file = st.file_uploader("Upload an observation (CSV, Excel or JSON)",
                                         type=["csv", "xls", "xlsx", "json"])
        if uploaded_file:
            try:
                y = read_observation_table(uploaded_file, uploaded_file.name)
                st.success(f"✅ Loaded {len(y)} samples")
            except (ValueError, KeyError) as e:
                st.error(f"❌ Error reading file: {e}")
    else:
        col1, col2, col3 = st.columns(3)
        with col1:
            N = int(st.number_input("Length N", min_value=8, max_value=4096, value=256, step=8))
        with col2:
            d_s = int(st.number_input("Signal dimension", min_value=1, max_value=8, value=2))
        with col3:
            rho = st.number_input("Peak amplitude", min_value=0.0, value=0.0, step=0.1)
        x = sample_signal(random_spec(d_s, substream(seed, "signal")), N)
        peak = float(np.max(np.abs(x)))
        x = x * (rho / peak) if peak > 0 else x
        y = x + gaussian_noise(N, seed, 0)

    if y is None:
        return
    st.dataframe(pd.DataFrame({'y': y}).describe().T, use_container_width=True)

    Z = build_nuisance()
    if Z is None or not st.button("Run tests"):
        return
    detectors = create_detection_algorithms(st.session_state.threshold_table)
    try:
        with st.spinner("Solving..."):
            outcomes = detectors.run_tests(y, Z, params=detection_params())
    except (HarmonicsError, ValueError, RuntimeError) as e:
        logger.error("Detection failed: %s", e)
        st.error(f"❌ {e}")
        return
    logger.info("Detection on N=%d with %s: %s", len(y), Z.describe(),
                {kind: outcome.decision for kind, outcome in outcomes.items()})

    cols = st.columns(len(outcomes))
    for col, (kind, outcome) in zip(cols, outcomes.items()):
        with col:
            st.metric(f"{kind.title()} statistic", f"{outcome.statistic:.4f}",
                      help=f"Threshold {outcome.threshold:.4f}")
            if outcome.rejected:
                st.warning("⚠️ Oscillation detected (H₀ rejected)")
            else:
                st.success("✅ No oscillation detected (H₀ accepted)")
            if not outcome.certified:
                st.error("❌ Decision not certified by the duality gap")
    if ENERGY not in outcomes:
        st.info("The energy test is not defined for ε-approximate nuisances.")
    st.dataframe(pd.DataFrame([o.to_dict() for o in outcomes.values()]), use_container_width=True)


def show_thresholds():
    st.header("📏 Detection Thresholds")
    col1, col2 = st.columns(2)
    with col1:
        N = int(st.number_input("Window length", min_value=2, max_value=65536, value=512, step=2, key="q_N"))
    with col2:
        include_mc = st.checkbox("Include Monte Carlo", value=False)
    row = {'N': N, 'alpha': alpha, 'bound': q_bound(N, alpha), 'chi2': chi2_quantile(N, alpha)}
    if include_mc:
        table = st.session_state.threshold_table
        with st.spinner("Simulating..."):
            try:
                row['mc'] = table.get_or_compute(N, alpha, MONTE_CARLO, int(threshold_trials), seed)
            except HarmonicsError as e:
                st.error(f"❌ {e}")
    st.dataframe(pd.DataFrame([row]), use_container_width=True)
    if len(st.session_state.threshold_table):
        with st.expander("Cached thresholds"):
            st.json(st.session_state.threshold_table.to_dict())


def show_sweep():
    st.header("📈 Power Sweep")
    presets = {k: v for k, v in load_presets().items() if v.get('problem') == 'P1'}
    preset = st.selectbox("Preset", ["custom"] + sorted(presets))
    base = dict(presets.get(preset, {'problem': 'P1'}))
    col1, col2, col3 = st.columns(3)
    with col1:
        base['N'] = int(st.number_input("N", min_value=16, max_value=4096, value=int(base.get('N', 128))))
    with col2:
        base['trials'] = int(st.number_input("Trials", min_value=1, max_value=5000, value=50))
    with col3:
        base['rho_step'] = st.number_input("Grid step", min_value=0.05, max_value=1.0, value=0.25, step=0.05)
    base.update({'alpha': alpha, 'seed': seed, 'threshold_method': threshold_method,
                 'threshold_trials': int(threshold_trials), 'threshold': user_threshold})
    if not st.button("Run sweep"):
        return
    try:
        cfg = ExperimentConfig.from_dict(base)
        with st.spinner("Sweeping..."):
            records = table2_sweep(cfg, table=st.session_state.threshold_table)
    except (HarmonicsError, ValueError, RuntimeError) as e:
        logger.error("Sweep failed: %s", e)
        st.error(f"❌ {e}")
        return
    logger.info("Sweep N=%d, %d trials finished in %.1f s", cfg.N, cfg.trials, records.attrs['runtime_s'])
    col1, col2 = st.columns(2)
    with col1:
        st.metric("ρ* basic", format_rho_star(records.attrs['rho_star_basic']))
    with col2:
        st.metric("ρ* energy", format_rho_star(records.attrs['rho_star_energy']))
    st.dataframe(empirical_risk(records, cfg.alpha), use_container_width=True)
    st.download_button("Download CSV", records_to_csv(records), file_name=f"sweep_N{cfg.N}.csv")
    st.caption(f"Energy test degrees of freedom: {energy_dof(cfg.N, NuisanceSpec.zero())}")


def show_verification():
    st.header("🔬 Verification Suites")
    scale = st.selectbox("Scale", list(SUITE_SCALES), index=1)
    suites = st.multiselect("Suites", list(SUITE_SCALES[scale]), default=["divisible", "autoconvolution"])
    if not st.button("Run verification"):
        return
    with st.spinner("Verifying..."):
        report = run_all_suites(seed, scale=scale, suites=suites)
    logger.info("Verification (%s scale, suites %s): passed=%s", scale, suites, report['passed'])
    if report['passed']:
        st.success("✅ All selected suites passed")
    else:
        st.error("❌ At least one suite failed")
    st.download_button("Download report", json.dumps(report, indent=2, sort_keys=True),
                       file_name="verification.json")
    st.json(report)


# Main app tabs
st.title("〰️ Harmonic Oscillation Detection")
st.markdown("**Certified detection of harmonic oscillations observed in white Gaussian noise**")

tabs = st.tabs(["📊 Detection", "📏 Thresholds", "📈 Power Sweep", "🔬 Verification"])

with tabs[0]:
    show_detection()

with tabs[1]:
    show_thresholds()

with tabs[2]:
    show_sweep()

with tabs[3]:
    show_verification()
