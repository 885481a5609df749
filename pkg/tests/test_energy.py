import numpy as np
import pytest
from hypothesis import given, strategies as st

from ruralcov.energy import (FlightCycle, SolarUavParams, UavEnergyParams, UnreachableStationError, availability,
                             dedicated_station_availability, solar_uav_net_powers, sortie_service_time,
                             station_cycle, travel_leg)

P = UavEnergyParams()


def test_battery_energy():
    assert P.battery_j == pytest.approx(639_360.0)


def test_travel_leg_examples():
    assert travel_leg(2000.0, P) == pytest.approx((200.0, 32_360.0))
    assert travel_leg(0.0, P) == (0.0, 0.0)
    with pytest.raises(ValueError):
        travel_leg(-1.0, P)


def test_service_time_examples():
    assert sortie_service_time(P, 2000.0) == pytest.approx((639_360 - 32_360) / 177.5)
    assert sortie_service_time(P, 2000.0) == pytest.approx(3420.0, abs=0.5)
    assert sortie_service_time(P, 0.0) == pytest.approx(3602.03, abs=0.01)
    with pytest.raises(UnreachableStationError):
        sortie_service_time(P, 639_360 / 161.8 * 10 + 1.0)


def test_service_time_by_energy_integration():
    """Step the battery down second by second: travel out, hover, travel back."""
    dt = 0.01
    energy = P.battery_j
    out_leg = 1000.0 / P.speed_mps
    energy -= 2 * out_leg * P.power_travel_w
    hover = 0.0
    while energy - P.power_service_w * dt >= 0:
        energy -= P.power_service_w * dt
        hover += dt
    assert hover == pytest.approx(sortie_service_time(P, 2000.0), abs=2 * dt)


def test_availability_examples():
    assert availability(FlightCycle(3420.0, 200.0, 0.0, 3600.0)) == pytest.approx(3420 / 7220)
    assert availability(FlightCycle(3420.0, 200.0, 0.0, 3600.0)) == pytest.approx(0.4737, abs=1e-4)
    assert availability(FlightCycle(100.0)) == 1.0
    cyc = station_cycle(P, 1000.0, 3600.0)
    assert cyc.t_travel == pytest.approx(200.0) and cyc.t_serve == pytest.approx(3420.0, abs=0.5)
    with pytest.raises(ValueError):
        FlightCycle(-1.0)


def test_solar_powers():
    same = solar_uav_net_powers(P, SolarUavParams(0.0, 1.0))
    assert same.power_service_w == P.power_service_w and same.power_travel_w == P.power_travel_w
    heavy = solar_uav_net_powers(P, SolarUavParams(20.0, 1.15))
    assert heavy.power_service_w == pytest.approx(184.125)
    assert heavy.power_service_w > P.power_service_w
    light = solar_uav_net_powers(P, SolarUavParams(10.0, 1.0))
    assert P.battery_j / light.power_service_w / (P.battery_j / P.power_service_w) == pytest.approx(177.5 / 167.5)
    with pytest.raises(ValueError):
        solar_uav_net_powers(P, SolarUavParams(500.0, 1.0))


def test_dedicated_availability_vectorised_and_infeasible():
    a = dedicated_station_availability(P, np.array([0.0, 1000.0, 1e6]), 3600.0)
    assert a[0] == pytest.approx(3602.03 / (3602.03 + 3600), rel=1e-5)
    assert a[1] == pytest.approx(3420 / 7220, abs=1e-4)
    assert a[2] == 0.0


@given(st.floats(0, 15_000), st.floats(0, 20_000))
def test_cycle_energy_conservation(dist, t_charge):
    """Battery spent on a sortie is exactly the usable capacity."""
    cyc = station_cycle(P, dist, t_charge)
    spent = cyc.t_serve * P.power_service_w + cyc.t_travel * P.power_travel_w
    assert spent == pytest.approx(P.usable_j, rel=1e-9)
    assert 0.0 <= availability(cyc) <= 1.0


@given(st.floats(0, 15_000), st.floats(0, 15_000), st.floats(0, 20_000), st.floats(0, 20_000))
def test_availability_monotone(d1, d2, t1, t2):
    dl, dh = sorted((d1, d2))
    tl, th = sorted((t1, t2))
    assert availability(station_cycle(P, dh, tl)) <= availability(station_cycle(P, dl, tl)) + 1e-12
    assert availability(station_cycle(P, dl, th)) <= availability(station_cycle(P, dl, tl)) + 1e-12


def test_params_validation():
    with pytest.raises(ValueError):
        UavEnergyParams(speed_mps=0.0)
    with pytest.raises(ValueError):
        UavEnergyParams(safety_margin=1.0)
