"""Shared fixtures: paths into the protocol corpus and loaded files."""

from pathlib import Path

import pytest

from mpstkit.elaborate import load_text

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

CONSISTENT_FIXTURES = {
    "negotiation.mpst": ["Negotiation"],
    "negotiation_generic.mpst": ["NegotiationVia"],
    "two_buyer.mpst": ["Purchase", "Decision"],
    "three_buyer.mpst": ["Purchase", "Decision", "Handoff"],
    "game.mpst": ["Game"],
    "adder.mpst": ["Adder"],
    "fibonacci.mpst": ["Fibonacci"],
    "http.mpst": ["Http"],
    "loan.mpst": ["Loan"],
    "smtp.mpst": ["Smtp"],
}

INCONSISTENT_FIXTURES = {
    "authorisation.mpst": ["Authorisation"],
    "oauth2_fragment.mpst": ["OauthFragment"],
    "rec_two_buyers.mpst": ["RecTwoBuyers"],
    "rec_map_reduce.mpst": ["RecMapReduce"],
    "mp_workers.mpst": ["MpWorkers"],
    "booking.mpst": ["Booking"],
}

RUNNABLE_FIXTURES = [
    "negotiation.mpst",
    "two_buyer.mpst",
    "three_buyer.mpst",
    "game.mpst",
    "adder.mpst",
    "fibonacci.mpst",
    "http.mpst",
    "loan.mpst",
    "smtp.mpst",
]


def fixture_path(name: str) -> Path:
    return FIXTURES / name


def load_fixture(name: str):
    return load_text(fixture_path(name).read_text())


@pytest.fixture(scope="session")
def negotiation():
    return load_fixture("negotiation.mpst")


@pytest.fixture(scope="session")
def two_buyer():
    return load_fixture("two_buyer.mpst")


@pytest.fixture(scope="session")
def three_buyer():
    return load_fixture("three_buyer.mpst")


@pytest.fixture(scope="session")
def authorisation():
    return load_fixture("authorisation.mpst")
