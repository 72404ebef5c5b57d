# Copyright 2026 The attnbf Authors
# License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

import os
import shutil

import pytest

SMALL_CONFIG = """\
[simulator]
duration_min = 1.0
duration_max = 1.5
[stft]
window_len = 256
hop = 64
[attention]
model_dim = 16
ff_dim = 32
heads = 2
blocks = 1
[train]
batch_size = 2
lr = 0.003
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL_CONFIG)
    return path


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("ATTNBF_CLI") or shutil.which("attnbf")
    if not path:
        pytest.skip("attnbf command-line tool not built")
    return path
