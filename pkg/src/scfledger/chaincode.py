"""Chaincode lifecycle: install, instantiate, upgrade.

An upgrade is only effective on peers that have the new version
installed; a peer lacking it keeps running the highest version it does
have that has been activated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Set

from .errors import NotInstalledError, VersionRegressionError


@dataclass
class ChaincodeMeta:
    name: str
    version: int  # currently activated version
    installed_on_peers: Set[str] = field(default_factory=set)
    instantiated: bool = False


class ChaincodeRegistry:
    def __init__(self) -> None:
        # name -> peer -> set of installed versions
        self._installed: Dict[str, Dict[str, Set[int]]] = {}
        self._active: Dict[str, int] = {}

    def install(self, name: str, version: int, peer: str) -> None:
        if version < 1:
            raise VersionRegressionError("chaincode versions start at 1")
        self._installed.setdefault(name, {}).setdefault(peer, set()).add(version)

    def _peers_with(self, name: str, version: int) -> Set[str]:
        return {
            peer
            for peer, versions in self._installed.get(name, {}).items()
            if version in versions
        }

    def instantiate(self, name: str, version: int) -> None:
        if not self._peers_with(name, version):
            raise NotInstalledError(f"{name} v{version} is not installed on any peer")
        if name in self._active:
            raise VersionRegressionError(f"{name} is already instantiated; use upgrade")
        self._active[name] = version

    def upgrade(self, name: str, version: int) -> None:
        current = self._active.get(name)
        if current is None:
            raise NotInstalledError(f"{name} has not been instantiated")
        if version <= current:
            raise VersionRegressionError(f"{name} v{version} does not exceed v{current}")
        if not self._peers_with(name, version):
            raise NotInstalledError(f"{name} v{version} is not installed on any peer")
        self._active[name] = version

    def effective_version(self, name: str, peer: str) -> Optional[int]:
        """Version a given peer runs: its highest install not beyond the
        activated version. None when the peer cannot invoke at all."""
        active = self._active.get(name)
        if active is None:
            return None
        versions = self._installed.get(name, {}).get(peer, set())
        usable = [v for v in versions if v <= active]
        return max(usable) if usable else None

    def assert_invokable(self, name: str, peer: str) -> int:
        version = self.effective_version(name, peer)
        if version is None:
            raise NotInstalledError(f"{name} is not runnable on {peer}")
        return version

    def meta(self, name: str) -> ChaincodeMeta:
        peers = {
            peer for peer, versions in self._installed.get(name, {}).items() if versions
        }
        return ChaincodeMeta(
            name=name,
            version=self._active.get(name, 0),
            installed_on_peers=peers,
            instantiated=name in self._active,
        )
