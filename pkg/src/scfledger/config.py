"""Network configuration: file format, defaults, and validation.

The config file is JSON. The ``FSCF_CONFIG`` environment variable
overrides the config path for every CLI entry point.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError

ENV_CONFIG = "FSCF_CONFIG"

# Simulated node counts mirroring the reference deployment:
# 4 state-db instances, 2 CA nodes, 4 peers, 1 orderer, 1 client driver.
DEFAULT_STATE_DB_COUNT = 4
DEFAULT_CA_COUNT = 2
DEFAULT_PEER_COUNT = 4
DEFAULT_ORDERER_COUNT = 1
DEFAULT_CLIENT_COUNT = 1

DEFAULT_CA_SEED = "scfledger-dev-seed-0001"


@dataclass
class NetworkConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8360
    block_size: int = 10
    timeout_ms: int = 2000
    ordering_mode: str = "solo"  # "solo" or "kafka:P"
    data_dir: Optional[str] = None  # None keeps the block log in memory
    ca_seed: str = DEFAULT_CA_SEED  # any string of at least 16 bytes
    state_db_count: int = DEFAULT_STATE_DB_COUNT
    ca_count: int = DEFAULT_CA_COUNT
    peer_count: int = DEFAULT_PEER_COUNT
    orderer_count: int = DEFAULT_ORDERER_COUNT
    client_count: int = DEFAULT_CLIENT_COUNT

    def validate(self) -> "NetworkConfig":
        if self.block_size < 1:
            raise ConfigError("block_size must be at least 1")
        if self.timeout_ms < 1:
            raise ConfigError("timeout_ms must be at least 1")
        if len(self.ca_seed.encode("utf-8")) < 16:
            raise ConfigError("ca_seed must be at least 16 bytes")
        if self.peer_count < 1 or self.orderer_count < 1:
            raise ConfigError("topology needs at least one peer and one orderer")
        if not (self.ordering_mode == "solo" or self.ordering_mode.startswith("kafka:")):
            raise ConfigError(f"unknown ordering mode {self.ordering_mode!r}")
        if self.ordering_mode.startswith("kafka:"):
            try:
                if int(self.ordering_mode.split(":", 1)[1]) < 1:
                    raise ConfigError("kafka partitions must be at least 1")
            except ValueError:
                raise ConfigError(f"unknown ordering mode {self.ordering_mode!r}")
        return self

    @property
    def seed_bytes(self) -> bytes:
        return self.ca_seed.encode("utf-8")

    @property
    def peers(self) -> list[str]:
        return [f"peer{i}" for i in range(self.peer_count)]

    def to_json(self) -> dict:
        return {
            "listen": f"{self.listen_host}:{self.listen_port}",
            "blockSize": self.block_size,
            "timeoutMs": self.timeout_ms,
            "orderingMode": self.ordering_mode,
            "dataDir": self.data_dir,
            "caSeed": self.ca_seed,
        }

    @classmethod
    def from_json(cls, data: dict) -> "NetworkConfig":
        cfg = cls()
        listen = data.get("listen")
        if listen:
            host, _, port = str(listen).rpartition(":")
            try:
                cfg.listen_host, cfg.listen_port = host or "127.0.0.1", int(port)
            except ValueError:
                raise ConfigError(f"bad listen address {listen!r}")
        cfg.block_size = int(data.get("blockSize", cfg.block_size))
        cfg.timeout_ms = int(data.get("timeoutMs", cfg.timeout_ms))
        cfg.ordering_mode = data.get("orderingMode", cfg.ordering_mode)
        cfg.data_dir = data.get("dataDir", cfg.data_dir)
        cfg.ca_seed = data.get("caSeed", cfg.ca_seed)
        return cfg.validate()


def load_config(path: Optional[str] = None) -> NetworkConfig:
    """Load a config file; the FSCF_CONFIG env var overrides the path."""
    resolved = os.environ.get(ENV_CONFIG) or path
    if resolved is None:
        return NetworkConfig().validate()
    file_path = Path(resolved)
    if not file_path.exists():
        raise ConfigError(f"config file not found: {file_path}")
    try:
        data = json.loads(file_path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    return NetworkConfig.from_json(data)
