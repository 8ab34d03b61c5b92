import pytest
import yaml
from hypothesis import settings

from cipherschool.lessons import load_content_pack

settings.register_profile("package", deadline=None, max_examples=60)
settings.load_profile("package")


@pytest.fixture(scope="session")
def pack():
    return load_content_pack()


@pytest.fixture()
def accounts_file(tmp_path):
    path = tmp_path / "accounts.yaml"
    path.write_text(
        yaml.safe_dump(
            [
                {"username": "peter", "password": "peter-pass", "display_name": "Peter", "cohort": "ms"},
                {"username": "mary", "password": "mary-pass", "display_name": "Mary", "cohort": "hs"},
            ]
        )
    )
    return path


@pytest.fixture()
def make_app(tmp_path, accounts_file):
    """Factory building a service over a shared data dir, so tests can
    simulate restarts by building a second app on the same state."""
    from cipherschool.service import Settings, create_app

    def factory(**overrides):
        kwargs = dict(
            data_dir=tmp_path / "data",
            accounts_path=accounts_file,
            seed=1234,
            use_env_provider=False,
        )
        kwargs.update(overrides)
        return create_app(Settings(**kwargs))

    return factory


@pytest.fixture()
def client(make_app):
    from fastapi.testclient import TestClient

    return TestClient(make_app())
