from xprlab.certify import constraint_grid_size
from xprlab.suite import AcceptanceSuite, CallCounter


def test_call_counter():
    counted = CallCounter(lambda x: 2 * x)
    assert [counted(k) for k in range(3)] == [0, 2, 4]
    assert counted.calls == 3


def test_van_der_waerden_criterion_counts_samples():
    details = AcceptanceSuite(seed=0, quick=True).van_der_waerden()
    assert details["ok"]
    assert details["sizes_matched"] == details["trials"] == 10
    assert details["branch_grid_points"] == constraint_grid_size(1, 1, 1, 2) + 1 == 13
