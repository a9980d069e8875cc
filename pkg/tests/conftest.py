import pytest

from consent_fabric import Engine


@pytest.fixture
def engine():
    return Engine()


@pytest.fixture
def trio(engine):
    """Three agents with lockers: an issuer, a holder, and a counterpart."""
    ids = {}
    for name in ("issuer", "holder", "other"):
        agent = engine.execute("create-agent", name=name)["agent"]
        locker = engine.execute("create-locker", owner=agent)["locker"]
        ids[name] = agent
        ids[f"{name}_locker"] = locker
    return engine, ids


def make_live(engine, host_locker, guest_locker, host_agent, guest_agent,
              purpose="exchange", rules=()):
    """Publish an endpoint and connect, returning the connection id."""
    ct = engine.execute("define-ctype", purpose=purpose,
                        rules=list(rules))["ctype"]
    ep = engine.execute("publish-endpoint", host=host_locker, ctype=ct,
                        actor=host_agent)["endpoint"]
    return engine.execute("connect", guest=guest_locker, endpoint=ep,
                          actor=guest_agent)["connection"]


@pytest.fixture
def linked(trio):
    """trio plus a live issuer<->holder connection."""
    engine, ids = trio
    ids["conn"] = make_live(engine, ids["issuer_locker"], ids["holder_locker"],
                            ids["issuer"], ids["holder"])
    return engine, ids


@pytest.fixture
def document(linked):
    """linked plus an issuer-owned resource node with nested content."""
    engine, ids = linked
    made = engine.execute(
        "create-resource", owner=ids["issuer"], locker=ids["issuer_locker"],
        purpose="records",
        content={"title": "ledger", "body": {"a": 1, "b": {"c": 2}}})
    ids["node"] = made["node"]
    ids["resource"] = made["resource"]
    return engine, ids
