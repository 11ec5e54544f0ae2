import json

import numpy as np
import pytest

from steering.constructions import (
    bernoulli_signs,
    build_dichotomic_functional,
    build_random_functional,
    build_sign_povms,
    maximally_entangled,
)
from steering.errors import ValidationError
from steering.linalg import random_density
from steering.model import Assemblage, DichotomicObservable, SteeringFunctional
from steering.serialization import from_json, to_json


def reload(obj):
    return from_json(json.loads(json.dumps(to_json(obj))))


def test_functional_header_and_bits(rng):
    F = build_random_functional(4, bernoulli_signs(4, 7))
    data = to_json(F)
    assert (data["type"], data["n"], data["m"], data["d"]) == ("steering-functional", 4, 5, 5)
    assert np.array_equal(reload(F).F, F.F)


def test_complex_entries_survive(rng):
    rho = random_density(3, rng)
    sigma = Assemblage(np.array([[rho.data]]))
    loaded = reload(sigma)
    assert isinstance(loaded, Assemblage)
    assert np.array_equal(loaded.sigma, sigma.sigma)


@pytest.mark.parametrize(
    "obj",
    [
        build_sign_povms(3, bernoulli_signs(3, 1)),
        build_dichotomic_functional(2, embed_dim=4),
        DichotomicObservable(np.array([np.diag([1.0, -1.0])])),
        maximally_entangled(2),
    ],
    ids=["povm", "dichotomic-functional", "observable", "matrix"],
)
def test_every_type_reloads(obj):
    loaded = reload(obj)
    assert type(loaded) is type(obj)


def test_header_mismatch_rejected():
    data = to_json(SteeringFunctional(np.zeros((2, 1, 2, 2))))
    data["n"] = 3
    with pytest.raises(ValidationError) as exc:
        from_json(data)
    assert exc.value.constraint == "json-header"


def test_unknown_type_rejected():
    with pytest.raises(ValidationError, match="json-type"):
        from_json({"type": "bell-inequality"})


def test_unserializable_object():
    with pytest.raises(TypeError):
        to_json(object())
