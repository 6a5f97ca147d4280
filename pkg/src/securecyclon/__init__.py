"""Cyclon peer sampling with accountable, security-hardened gossip.

The package pairs a deterministic cycle-driven overlay simulator with two
protocol modes: the classic random peer-sampling baseline, and a hardened
mode in which node descriptors carry signed chains of ownership, turning
every protocol violation into transferable, self-certifying evidence.
"""

__version__ = "0.1.0"

from .config import ChurnEvent, ConfigInvalid, ScenarioConfig
from .descriptor import (
    Address,
    ChainRelation,
    Descriptor,
    DescriptorKey,
    chain_relation,
    create_descriptor,
    deserialize,
    serialize,
    transfer_ownership,
    verify_chain,
)
from .identity import Clock, Ed25519Scheme, HashMacScheme, KeyPair, NodeId
from .kernel import Simulation, run
from .metrics import MetricsSeries, cost_model
from .proofs import ViolationKind, ViolationProof, validate_proof
from .view import ProtocolParams, View, ViewEntry

__all__ = [
    "Address",
    "ChainRelation",
    "ChurnEvent",
    "Clock",
    "ConfigInvalid",
    "Descriptor",
    "DescriptorKey",
    "Ed25519Scheme",
    "HashMacScheme",
    "KeyPair",
    "MetricsSeries",
    "NodeId",
    "ProtocolParams",
    "ScenarioConfig",
    "Simulation",
    "View",
    "ViewEntry",
    "ViolationKind",
    "ViolationProof",
    "chain_relation",
    "cost_model",
    "create_descriptor",
    "deserialize",
    "run",
    "serialize",
    "transfer_ownership",
    "validate_proof",
    "verify_chain",
]
