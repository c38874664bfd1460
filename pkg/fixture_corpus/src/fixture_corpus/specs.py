"""Fixture catalog: what gets generated and what the analyzer must say about it."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

REGISTRATION_PATTERNS = (
    "DecoratorBased",
    "AddToolApi",
    "ToolObject",
    "RouteOperationId",
    "RuntimeEnumeration",
    "RegisterApi",
    "ToolHandlerSubclass",
)

AUTH_PATTERNS = ("None", "CachedStartup", "RuntimeUnbound", "CallerBound")
CAPABILITIES = ("SystemExecution", "PersistentData", "NetworkCommunication", "PhysicalInterface")

AUTH_TO_VERDICT = {
    "None": "AuthNone",
    "CachedStartup": "AuthCache",
    "RuntimeUnbound": "AuthRuntime",
    "CallerBound": "Secure",
}

# probing a live CachedStartup server succeeds under the cached state;
# a CallerBound server rejects probes that skipped the session flow
AUTH_TO_PROBE = {"CachedStartup": "NotEnforced", "CallerBound": "Enforced"}


@dataclass
class FixtureSpec:
    fixture_id: str
    registration_pattern: str
    auth_pattern: Optional[str]
    capability: Optional[str]
    expected_verdict: str
    runnable: bool
    expected_tool: str
    launch: Optional[str] = None
    expected_probe: Optional[str] = None
    files: dict[str, str] = field(default_factory=dict, repr=False)

    def to_manifest_entry(self) -> dict:
        return {
            "fixture_id": self.fixture_id,
            "path": self.fixture_id,
            "registration_pattern": self.registration_pattern,
            "auth_pattern": self.auth_pattern,
            "capability": self.capability,
            "expected_verdict": self.expected_verdict,
            "expected_tool": self.expected_tool,
            "runnable": self.runnable,
            "launch": self.launch,
            "expected_probe": self.expected_probe,
        }
