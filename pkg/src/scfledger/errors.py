"""Exception hierarchy shared across the ledger, contracts, and gateway.

Every error class carries a stable ``code`` string. The transaction
executor records the code of a failed transaction in its block, and the
HTTP gateway maps codes onto status codes, so codes are part of the
observable contract and must not be renamed casually.
"""

from __future__ import annotations


class ScfError(Exception):
    """Base class for all package errors."""

    code = "error"


class ConfigError(ScfError):
    code = "config"


# --- identity / authentication -------------------------------------------

class AuthError(ScfError):
    code = "auth"


class BadSignatureError(AuthError):
    code = "bad-signature"


class UnknownUserError(AuthError):
    code = "unknown-user"


class ExpiredCertificateError(AuthError):
    code = "expired-certificate"


class TypeMismatchError(AuthError):
    code = "type-mismatch"


# --- transaction submission -----------------------------------------------

class SubmitError(ScfError):
    code = "submit"


class DuplicateTxIdError(SubmitError):
    code = "duplicate-txid"


class UnknownOpError(SubmitError):
    code = "unknown-op"


# --- contract execution ----------------------------------------------------

class ContractError(ScfError):
    """Raised by contract handlers; marks the transaction invalid."""

    code = "contract"


class AlreadyExistsError(ContractError):
    code = "already-exists"


class NotFoundError(ContractError):
    code = "not-found"


class AccessDeniedError(ContractError):
    code = "access-denied"


class NotPartyError(ContractError):
    code = "not-party"


class FrozenProjectError(ContractError):
    code = "frozen"


class IllegalFieldError(ContractError):
    code = "illegal-field"


class IllegalValueError(ContractError):
    code = "illegal-value"


class BadProjectError(ContractError):
    """A financing project failed its validity check (BadFP)."""

    code = "bad-fp"


class BadPolicyError(ContractError):
    code = "bad-policy"


class DuplicatePolicyError(ContractError):
    code = "duplicate-policy"


class MalformedAttributesError(ContractError):
    code = "malformed-attributes"


# --- workflow scripting ----------------------------------------------------

class BadPartyError(ScfError):
    code = "bad-party"


class EmptyCollateralError(ScfError):
    code = "empty-collateral"


class BadDepositError(ScfError):
    code = "bad-deposit"


# --- chain integrity --------------------------------------------------------

class ChainIntegrityError(ScfError):
    code = "chain-integrity"


class BrokenChainLinkError(ChainIntegrityError):
    code = "broken-chain-link"


class TxRootMismatchError(ChainIntegrityError):
    code = "txroot-mismatch"


# --- chaincode lifecycle ----------------------------------------------------

class ChaincodeError(ScfError):
    code = "chaincode"


class NotInstalledError(ChaincodeError):
    code = "not-installed"


class VersionRegressionError(ChaincodeError):
    code = "version-regression"
