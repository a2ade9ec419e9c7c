"""Context-based semantic mediation for web-service compositions with community substitution."""
from .descriptor import parse_descriptor, serialize_descriptor
from .ontology import load_knowledge_base
from .semantic_object import build_semantic_object
from .mediation import convert
from .community import adopt_context, availability_downtime
from .composition import detect_conflicts, execute, insert_mediators, substitute, verify_consistency

__version__ = "0.1.0"
