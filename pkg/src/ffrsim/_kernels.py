"""Hot inner loops of the simulator.

Every function here is written in the subset of Python that numba's nopython
mode accepts.  When numba is importable they are compiled with
``numba.njit(cache=True, nogil=True)``; setting ``FFRSIM_DISABLE_NUMBA=1`` in
the environment (before import) keeps them as plain Python/numpy functions.
Both paths execute the same source, so results agree to rounding.
"""

import importlib.util
import os

import numpy as np


def _numba_requested():
    flag = os.environ.get("FFRSIM_DISABLE_NUMBA", "").strip().lower()
    if flag in ("1", "true", "yes", "on"):
        return False
    return importlib.util.find_spec("numba") is not None


USE_NUMBA = _numba_requested()

if USE_NUMBA:
    import numba

    def jit(fn):
        return numba.njit(cache=True, nogil=True)(fn)

else:

    def jit(fn):
        return fn


BACKEND = "numba" if USE_NUMBA else "python"

# Layout of the resource/strategy parameter vector consumed by ``simulate``.
P_EV_K = 0
P_EV_W = 1
P_EV_E = 2
P_EV_SOC0 = 3
P_EV_SOC_MIN = 4
P_EV_SOC_MAX = 5
P_UPS_K = 6
P_UPS_W = 7
P_IT_BETA = 8
P_IT_W = 9
P_B_K = 10
P_B_T = 11
P_B_W = 12
P_B_E = 13
P_B_SOC0 = 14
P_B_SOC_MIN = 15
P_B_SOC_MAX = 16
P_EN_EV = 17
P_EN_DC = 18
P_EN_B = 19
P_BIDIR = 20
P_HORIZON = 21
P_ADAPTIVE = 22
P_FW_EV = 23
P_FW_DC = 24
P_FW_B = 25
P_T_EV = 26
P_T_DC = 27
P_T_B = 28
P_GAIN_CAP = 29
P_INTERP = 30
P_LOSS = 31
P_F0 = 32
P_DAMPING = 33
N_PARAMS = 34

# Delay lengths (in integrator steps) in the int vector.
D_EV = 0
D_UPS = 1
D_IT = 2

# Output columns, in CSV order.
C_T = 0
C_F = 1
C_EV = 2
C_UPS = 3
C_IT = 4
C_BESS = 5
C_TOTAL = 6
C_A_EV = 7
C_A_DC = 8
C_A_B = 9
C_SOC_EV = 10
C_SOC_B = 11
N_COLS = 12

STATUS_OK = 0
STATUS_COLLAPSE = 1
STATUS_NONFINITE = 2


@jit
def clamp(x, lo, hi):
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


@jit
def ring_push(buf, head, value):
    """Store ``value`` after ``head`` and return the new head index."""
    head = head + 1
    if head == buf.shape[0]:
        head = 0
    buf[head] = value
    return head


@jit
def ring_read(buf, head, lag):
    """Value pushed ``lag`` pushes before the most recent one."""
    idx = head - lag
    if idx < 0:
        idx += buf.shape[0]
    return buf[idx]


@jit
def discharge_headroom(rated, soc, soc_min, energy_mwh, horizon):
    # Power that can be sustained for ``horizon`` seconds above the SOC floor.
    if soc <= soc_min:
        return 0.0
    return min(rated, (soc - soc_min) * energy_mwh * 3600.0 / horizon)


@jit
def charge_headroom(rated, soc, soc_max, energy_mwh, horizon):
    if soc >= soc_max:
        return 0.0
    return min(rated, (soc_max - soc) * energy_mwh * 3600.0 / horizon)


@jit
def speed_capacity_weights(w_ev, w_dc, w_b, t_ev, t_dc, t_b):
    s_ev = w_ev / t_ev
    s_dc = w_dc / t_dc
    s_b = w_b / t_b
    total = s_ev + s_dc + s_b
    if total <= 0.0:
        return 0.0, 0.0, 0.0
    return s_ev / total, s_dc / total, s_b / total


@jit
def lag_rk4(p, target, tau, dt):
    """One RK4 step of dp/dt = (target - p)/tau with a constant target.

    Returns the new value and the RK4 quadrature of p over the step.
    """
    k1 = (target - p) / tau
    p2 = p + 0.5 * dt * k1
    k2 = (target - p2) / tau
    p3 = p + 0.5 * dt * k2
    k3 = (target - p3) / tau
    p4 = p + dt * k3
    k4 = (target - p4) / tau
    new = p + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    energy = dt * (p + 2.0 * p2 + 2.0 * p3 + p4) / 6.0
    return new, energy


@jit
def governor_rates(f, pg, online, gain, tc, lim, out):
    """Write governor state derivatives into ``out``; return their sum of states."""
    total = 0.0
    for i in range(pg.shape[0]):
        if online[i]:
            ref = clamp(-gain[i] * f, -lim[i], lim[i])
            out[i] = (ref - pg[i]) / tc[i]
            total += pg[i]
        else:
            out[i] = 0.0
    return total


@jit
def kinetic_constant(two_hs, online, f0):
    m = 0.0
    for i in range(two_hs.shape[0]):
        if online[i]:
            m += two_hs[i]
    return m / f0


@jit
def grid_rk4_step(f, pg, online, two_hs, gain, tc, lim, damping, f0, injection, dt):
    """Advance (frequency deviation, governor powers) by one RK4 step.

    ``injection`` is held constant over the step.  ``pg`` is updated in place;
    the new frequency deviation is returned.
    """
    n = pg.shape[0]
    m = kinetic_constant(two_hs, online, f0)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)

    g = governor_rates(f, pg, online, gain, tc, lim, k1)
    a1 = (injection + g - damping * f) / m
    for i in range(n):
        tmp[i] = pg[i] + 0.5 * dt * k1[i]
    f2 = f + 0.5 * dt * a1
    g = governor_rates(f2, tmp, online, gain, tc, lim, k2)
    a2 = (injection + g - damping * f2) / m
    for i in range(n):
        tmp[i] = pg[i] + 0.5 * dt * k2[i]
    f3 = f + 0.5 * dt * a2
    g = governor_rates(f3, tmp, online, gain, tc, lim, k3)
    a3 = (injection + g - damping * f3) / m
    for i in range(n):
        tmp[i] = pg[i] + dt * k3[i]
    f4 = f + dt * a3
    g = governor_rates(f4, tmp, online, gain, tc, lim, k4)
    a4 = (injection + g - damping * f4) / m
    for i in range(n):
        pg[i] += dt * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0
    return f + dt * (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0


@jit
def _delayed(buf, head, lag, c, f_stage, f_step, interp):
    # Delayed frequency at stage offset c (fraction of a step).
    if lag == 0:
        if interp:
            return f_stage
        return f_step
    older = ring_read(buf, head, lag)
    if not interp or c == 0.0:
        return older
    newer = ring_read(buf, head, lag - 1)
    return (1.0 - c) * older + c * newer


@jit
def simulate(
    two_hs,
    gov_gain,
    gov_tc,
    gov_lim,
    params,
    delays,
    trip_index,
    trip_step,
    n_steps,
    dt,
    sample_every,
    control_every,
    out,
):
    """Run the coupled grid/resource model and fill ``out`` with samples.

    Returns ``(status, step)``; ``step`` is where a failure was detected.
    Per step: read the frequency deviation, push it into the delay lines,
    refresh participation weights on the control cadence, evaluate resource
    outputs, then RK4-advance the swing equation, governors and BESS
    converter together.  Delayed channels see either the held stage-0
    sample or a linear interpolation of the buffered history at each stage.
    """
    ng = two_hs.shape[0]
    f0 = params[P_F0]
    damping = params[P_DAMPING]
    interp = params[P_INTERP] > 0.5
    bidir = params[P_BIDIR] > 0.5
    horizon = params[P_HORIZON]
    en_ev = params[P_EN_EV] > 0.5
    en_dc = params[P_EN_DC] > 0.5
    en_b = params[P_EN_B] > 0.5

    k_ev = params[P_EV_K]
    w_ev = params[P_EV_W]
    e_ev = params[P_EV_E]
    ev_soc_min = params[P_EV_SOC_MIN]
    ev_soc_max = params[P_EV_SOC_MAX]
    k_ups = params[P_UPS_K]
    w_ups = params[P_UPS_W]
    beta = params[P_IT_BETA]
    w_it = params[P_IT_W]
    k_b = params[P_B_K]
    t_b = params[P_B_T]
    w_b = params[P_B_W]
    e_b = params[P_B_E]
    b_soc_min = params[P_B_SOC_MIN]
    b_soc_max = params[P_B_SOC_MAX]

    lag_ev = delays[D_EV]
    lag_ups = delays[D_UPS]
    lag_it = delays[D_IT]
    buf_ev = np.zeros(lag_ev + 1)
    buf_ups = np.zeros(lag_ups + 1)
    buf_it = np.zeros(lag_it + 1)
    head_ev = 0
    head_ups = 0
    head_it = 0

    online = np.ones(ng, dtype=np.bool_)
    pg = np.zeros(ng)
    kg = np.empty((4, ng))
    tmp = np.empty(ng)
    m = kinetic_constant(two_hs, online, f0)

    f = 0.0
    pb = 0.0
    soc_ev = params[P_EV_SOC0]
    soc_b = params[P_B_SOC0]
    loss = 0.0
    a_ev = 0.0
    a_dc = 0.0
    a_b = 0.0
    scale = 1.0
    stage_c = np.array([0.0, 0.5, 0.5, 1.0])
    stage_w = np.array([1.0, 2.0, 2.0, 1.0])
    row = 0

    for n in range(n_steps + 1):
        if n == trip_step:
            loss = params[P_LOSS]
            if trip_index >= 0:
                online[trip_index] = False
                pg[trip_index] = 0.0
                m = kinetic_constant(two_hs, online, f0)
                if m <= 0.0:
                    return STATUS_COLLAPSE, n

        head_ev = ring_push(buf_ev, head_ev, f)
        head_ups = ring_push(buf_ups, head_ups, f)
        head_it = ring_push(buf_it, head_it, f)

        if n % control_every == 0:
            if params[P_ADAPTIVE] > 0.5:
                cap_ev = 0.0
                cap_dc = 0.0
                cap_b = 0.0
                if en_ev:
                    cap_ev = discharge_headroom(w_ev, soc_ev, ev_soc_min, e_ev, horizon)
                if en_dc:
                    cap_dc = w_ups + w_it
                if en_b:
                    cap_b = discharge_headroom(w_b, soc_b, b_soc_min, e_b, horizon)
                a_ev, a_dc, a_b = speed_capacity_weights(
                    cap_ev, cap_dc, cap_b, params[P_T_EV], params[P_T_DC], params[P_T_B]
                )
            else:
                a_ev = params[P_FW_EV]
                a_dc = params[P_FW_DC]
                a_b = params[P_FW_B]
            scale = 1.0
            cap = params[P_GAIN_CAP]
            if cap > 0.0:
                agg = a_ev * k_ev + a_dc * (k_ups + beta) + a_b * k_b
                if agg > cap:
                    scale = cap / agg

        g_ev = 0.0
        g_ups = 0.0
        g_it = 0.0
        g_b = 0.0
        if en_ev:
            g_ev = scale * a_ev * k_ev
        if en_dc:
            g_ups = scale * a_dc * k_ups
            g_it = scale * a_dc * beta
        if en_b:
            g_b = scale * a_b * k_b

        ev_hi = discharge_headroom(w_ev, soc_ev, ev_soc_min, e_ev, horizon)
        b_hi = discharge_headroom(w_b, soc_b, b_soc_min, e_b, horizon)
        ev_lo = 0.0
        b_lo = 0.0
        ups_lo = 0.0
        if bidir:
            ev_lo = -charge_headroom(w_ev, soc_ev, ev_soc_max, e_ev, horizon)
            b_lo = -charge_headroom(w_b, soc_b, b_soc_max, e_b, horizon)
            ups_lo = -w_ups

        # Stage-0 outputs are the sampled values at t_n.
        x_ev = ring_read(buf_ev, head_ev, lag_ev)
        x_ups = ring_read(buf_ups, head_ups, lag_ups)
        x_it = ring_read(buf_it, head_it, lag_it)
        p_ev = clamp(-g_ev * x_ev, ev_lo, ev_hi)
        p_ups = clamp(-g_ups * x_ups, ups_lo, w_ups)
        p_it = clamp(-g_it * x_it, 0.0, w_it)

        if n % sample_every == 0:
            out[row, C_T] = n * dt
            out[row, C_F] = f0 + f
            out[row, C_EV] = p_ev
            out[row, C_UPS] = p_ups
            out[row, C_IT] = p_it
            out[row, C_BESS] = pb
            out[row, C_TOTAL] = p_ev + p_ups + p_it + pb
            out[row, C_A_EV] = a_ev
            out[row, C_A_DC] = a_dc
            out[row, C_A_B] = a_b
            out[row, C_SOC_EV] = soc_ev
            out[row, C_SOC_B] = soc_b
            row += 1

        if n == n_steps:
            break

        # Coupled RK4 over (f, pg[], pb).
        f_n = f
        pb_n = pb
        f_s = f
        pb_s = pb
        df_acc = 0.0
        dpb_acc = 0.0
        e_ev_step = 0.0
        e_b_step = 0.0
        for s in range(4):
            c = stage_c[s]
            h = c * dt
            for i in range(ng):
                if s == 0:
                    tmp[i] = pg[i]
                else:
                    tmp[i] = pg[i] + h * kg[s - 1, i]
            gsum = governor_rates(f_s, tmp, online, gov_gain, gov_tc, gov_lim, kg[s])

            xe = _delayed(buf_ev, head_ev, lag_ev, c, f_s, f_n, interp)
            xu = _delayed(buf_ups, head_ups, lag_ups, c, f_s, f_n, interp)
            xi = _delayed(buf_it, head_it, lag_it, c, f_s, f_n, interp)
            pe = clamp(-g_ev * xe, ev_lo, ev_hi)
            pu = clamp(-g_ups * xu, ups_lo, w_ups)
            pi = clamp(-g_it * xi, 0.0, w_it)
            target_b = clamp(-g_b * f_s, b_lo, b_hi)

            dpb = (target_b - pb_s) / t_b
            dfs = (pe + pu + pi + pb_s - loss + gsum - damping * f_s) / m

            w = stage_w[s]
            df_acc += w * dfs
            dpb_acc += w * dpb
            e_ev_step += w * pe
            e_b_step += w * pb_s

            if s < 3:
                h = stage_c[s + 1] * dt
                f_s = f_n + h * dfs
                pb_s = pb_n + h * dpb

        for i in range(ng):
            pg[i] += dt * (kg[0, i] + 2.0 * kg[1, i] + 2.0 * kg[2, i] + kg[3, i]) / 6.0
        f = f_n + dt * df_acc / 6.0
        pb = pb_n + dt * dpb_acc / 6.0
        e_ev_step *= dt / 6.0
        e_b_step *= dt / 6.0

        if e_ev > 0.0:
            soc_ev = clamp(soc_ev - e_ev_step / (3600.0 * e_ev), ev_soc_min, ev_soc_max)
        if e_b > 0.0:
            soc_b = clamp(soc_b - e_b_step / (3600.0 * e_b), b_soc_min, b_soc_max)

        if not (np.isfinite(f) and np.isfinite(pb)):
            return STATUS_NONFINITE, n

    return STATUS_OK, n_steps
