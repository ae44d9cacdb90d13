from dataclasses import dataclass, field

from .identifiers import check_identifier


@dataclass
class ScopeRecord:
    """
    Automaton state of one (object, scope) pair inside a session,
    together with the hash of the policy that produced it.
    """

    policy_hash: str
    state: dict  # serialized valuation: {var: {"t": type, "v": value}}
    killed: bool = False


@dataclass
class Session:
    """
    Per-session automaton states, keyed by (object id, scope key); the
    scope key is "default" or a disseminator id.
    """

    id: str
    scopes: dict[tuple[str, str], ScopeRecord] = field(default_factory=dict)

    def __post_init__(self):
        check_identifier(self.id, "sesión")

    def copy(self) -> "Session":
        return Session(
            self.id,
            {
                key: ScopeRecord(r.policy_hash, dict(r.state), r.killed)
                for key, r in self.scopes.items()
            },
        )
