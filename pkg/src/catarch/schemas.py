"""JSON schemas for the command spec files. Unknown fields are rejected."""

_GROUP_EXPLICIT = {
    "type": "object",
    "properties": {
        "degree": {"type": "integer", "minimum": 1},
        "generators": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        },
    },
    "required": ["degree", "generators"],
    "additionalProperties": False,
}

_GROUP_BUILTIN = {
    "type": "object",
    "properties": {
        "builtin": {"enum": ["trivial", "cyclic", "symmetric", "dihedral", "regular_cyclic",
                             "regular_symmetric", "regular_dihedral"]},
        "n": {"type": "integer", "minimum": 1},
    },
    "required": ["builtin", "n"],
    "additionalProperties": False,
}

REPS = ["vector", "entries", "vector+entries", "trivial"]

DERIVE = {
    "type": "object",
    "properties": {
        "version": {"type": "string"},
        "group": {"oneOf": [_GROUP_EXPLICIT, _GROUP_BUILTIN]},
        "mode": {"enum": ["equivariant", "invariant"]},
        "rep_in": {"enum": REPS},
        "rep_out": {"enum": REPS},
        "out_dim": {"type": "integer", "minimum": 1},
        "color": {"type": "boolean"},
    },
    "required": ["group"],
    "additionalProperties": False,
}

UNROLL = {
    "type": "object",
    "properties": {
        "version": {"type": "string"},
        "kind": {"enum": ["folding_rnn", "unfolding_rnn", "recursive_nn", "mealy", "moore"]},
        "dims": {
            "type": "object",
            "properties": {k: {"type": "integer", "minimum": 1} for k in ("a", "s", "o", "i")},
            "additionalProperties": False,
        },
        "nonlinearity": {"enum": ["identity", "tanh"]},
        "bias": {"type": "boolean"},
        "initial_state": {"enum": ["param", "zero"]},
        "seed": {"type": "integer"},
        "structure": {
            "type": "object",
            "properties": {
                "list_len": {"type": "integer", "minimum": 0},
                "steps": {"type": "integer", "minimum": 0},
                "seq_len": {"type": "integer", "minimum": 0},
                "tree_depth": {"type": "integer", "minimum": 0, "maximum": 12},
                "tree": {"type": ["object", "array"]},
            },
            "additionalProperties": False,
        },
    },
    "required": ["kind", "dims", "structure"],
    "additionalProperties": False,
}

CHECK = {
    "type": "object",
    "properties": {
        "version": {"type": "string"},
        "suite": {"type": "string"},
        "trials": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}

# structure key each kind needs
STRUCTURE_KEY = {
    "folding_rnn": ("list_len",),
    "unfolding_rnn": ("steps",),
    "recursive_nn": ("tree", "tree_depth"),
    "mealy": ("seq_len",),
    "moore": ("seq_len",),
}
