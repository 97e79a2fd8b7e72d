import struct

import numpy as np
import pytest

from uqnet.errors import FormatError
from uqnet.nn.builder import build_shallow_convnet
from uqnet.nn.checkpoint import MAGIC, decode_params, encode_params, load_params, save_params
from uqnet.nn.network import init_params


@pytest.fixture
def params(small_arch):
    net = build_shallow_convnet("flipout", 3, 60, 4, small_arch)
    return init_params(net, np.random.default_rng(41))


class TestUQNN:
    def test_save_and_load(self, params, tmp_path):
        path = save_params(tmp_path / "model.uqnn", params)
        loaded = load_params(path)
        assert list(loaded) == list(params)
        for name, value in params.items():
            np.testing.assert_array_equal(loaded[name], value)
            assert loaded[name].dtype == np.float32

    def test_layout(self):
        payload = encode_params({"w": np.array([[1.0, 2.0]], dtype=np.float32)})
        assert payload[:4] == MAGIC
        assert struct.unpack_from("<H", payload, 4) == (1,)
        assert struct.unpack_from("<H", payload, 6) == (1,)
        assert payload[8:9] == b"w"
        assert struct.unpack_from("<B2I", payload, 9) == (2, 1, 2)
        assert np.frombuffer(payload[18:], dtype="<f4").tolist() == [1.0, 2.0]

    def test_bad_magic(self):
        with pytest.raises(FormatError) as info:
            decode_params(b"NOPE\x01\x00")
        assert info.value.offset == 0

    def test_unsupported_version(self):
        with pytest.raises(FormatError):
            decode_params(MAGIC + struct.pack("<H", 9))

    def test_truncated_payload(self, params):
        payload = encode_params(params)
        with pytest.raises(FormatError) as info:
            decode_params(payload[:-3])
        assert info.value.offset is not None

    def test_missing_file(self, tmp_path):
        with pytest.raises(FormatError):
            load_params(tmp_path / "absent.uqnn")
