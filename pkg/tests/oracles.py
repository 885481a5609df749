"""Independent reference implementations used by several test modules."""
import numpy as np

from ruralcov.channel import ChannelParams


def discrete_time_fcfs(arrivals, n_chargers, charge_time):
    """Tick-by-tick FCFS queue for integer arrival times and charge time; returns waits."""
    order = sorted(range(len(arrivals)), key=lambda i: (arrivals[i], i))
    remaining = [0] * n_chargers
    waits = [None] * len(arrivals)
    queue = []
    pending = list(order)
    t = 0
    while any(w is None for w in waits):
        while pending and arrivals[pending[0]] == t:
            queue.append(pending.pop(0))
        for c in range(n_chargers):
            if remaining[c] == 0 and queue:
                uid = queue.pop(0)
                waits[uid] = t - arrivals[uid]
                remaining[c] = charge_time
                if charge_time == 0:
                    # a zero-length charge frees the charger within the same tick
                    while remaining[c] == 0 and queue:
                        uid = queue.pop(0)
                        waits[uid] = t - arrivals[uid]
        remaining = [max(r - 1, 0) for r in remaining]
        t += 1
    return waits


def grid_placement(living, working, working_weight, user_stddev, channel: ChannelParams, altitude,
                   rng, n_users=100_000, step_m=10.0):
    """Exhaustive search on the living-working segment with full Monte Carlo coverage.

    LoS states and fading gains are drawn per user once and reused at every
    grid point (common random numbers); the link is noise limited.
    """
    living, working = np.asarray(living, float), np.asarray(working, float)
    d = np.hypot(*(working - living))
    at_work = rng.random(n_users) < working_weight
    users = np.where(at_work[:, None], working, living) + rng.normal(size=(n_users, 2)) * user_stddev
    u_los = rng.random(n_users)
    g_los = rng.gamma(channel.m_los, 1.0 / channel.m_los, n_users)
    g_nlos = rng.gamma(channel.m_nlos, 1.0 / channel.m_nlos, n_users)
    ts = np.arange(0.0, d + 1e-9, step_m) / d
    best, best_cov = None, -1.0
    for t in ts:
        p = living + t * (working - living)
        horiz = np.hypot(*(users - p).T)
        d3 = np.hypot(horiz, altitude)
        theta = np.degrees(np.arctan2(altitude, horiz))
        p_los = 1.0 / (1.0 + channel.env_a * np.exp(-channel.env_b * (theta - channel.env_a)))
        los = u_los < p_los
        power = np.where(los, channel.rho_uav * channel.eta_los * d3 ** -channel.alpha_los * g_los,
                         channel.rho_uav * channel.eta_nlos * d3 ** -channel.alpha_nlos * g_nlos)
        cov = np.mean(power / channel.noise_power > channel.sinr_threshold)
        if cov > best_cov:
            best, best_cov = p, cov
    return best, best_cov
