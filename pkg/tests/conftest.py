import pytest

import testutil
from reborn.service import ServiceConfig, serve
from reborn.store import GraphStore
from reborn.templates import materialize


@pytest.fixture()
def resolver():
    return testutil.fixture_resolver()


@pytest.fixture()
def ttest_bundle(resolver):
    return materialize(resolver, "R12002")


@pytest.fixture()
def store(tmp_path):
    s = GraphStore(tmp_path / "test.journal")
    yield s
    s.close()


@pytest.fixture()
def soil_fixture_root(tmp_path):
    root = tmp_path / "fixtures"
    testutil.make_soil_fixture(root)
    return root


@pytest.fixture()
def service(tmp_path, soil_fixture_root):
    svc = serve(ServiceConfig(
        port=0,
        journal_path=tmp_path / "service.journal",
        fixture_root=soil_fixture_root,
    ))
    for tpl in testutil.load_fixture_templates().values():
        svc.store.add_template(tpl)
    yield svc
    svc.close()
