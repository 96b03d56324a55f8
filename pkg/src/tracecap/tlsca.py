"""Session certificate authority for TLS interception.

Each capture session gets a throwaway CA; the proxy mints one leaf per
contacted host, signed by that CA. Clients that trust the session CA (the
mock driver, or a browser via insecure-cert capability) can then be
man-in-the-middled for recording. The CA key never leaves the session.
"""

from __future__ import annotations

import datetime
import ipaddress
import ssl
import tempfile
import threading
from pathlib import Path
from typing import Dict, Optional, Tuple

from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.x509.oid import ExtendedKeyUsageOID, NameOID

from .errors import CaError

_ONE_DAY = datetime.timedelta(days=1)
_VALIDITY = datetime.timedelta(days=30)


def _name(common_name: str) -> x509.Name:
    return x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, common_name)])


def _san(host: str) -> x509.SubjectAlternativeName:
    try:
        return x509.SubjectAlternativeName([x509.IPAddress(ipaddress.ip_address(host))])
    except ValueError:
        return x509.SubjectAlternativeName([x509.DNSName(host)])


def _key_pem(key) -> bytes:
    return key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    )


class SessionCa:
    """In-memory CA that signs per-host leaf certificates on demand."""

    def __init__(self, common_name: str = "tracecap session CA"):
        try:
            self._key = ec.generate_private_key(ec.SECP256R1())
            now = datetime.datetime.now(datetime.timezone.utc)
            self._cert = (
                x509.CertificateBuilder()
                .subject_name(_name(common_name))
                .issuer_name(_name(common_name))
                .public_key(self._key.public_key())
                .serial_number(x509.random_serial_number())
                .not_valid_before(now - _ONE_DAY)
                .not_valid_after(now + _VALIDITY)
                .add_extension(x509.BasicConstraints(ca=True, path_length=0), critical=True)
                .add_extension(
                    x509.KeyUsage(
                        digital_signature=True, key_cert_sign=True, crl_sign=True,
                        content_commitment=False, key_encipherment=False,
                        data_encipherment=False, key_agreement=False,
                        encipher_only=False, decipher_only=False,
                    ),
                    critical=True,
                )
                .sign(self._key, hashes.SHA256())
            )
        except Exception as exc:  # pragma: no cover - cryptography failures
            raise CaError(f"could not generate session CA: {exc}") from exc
        self._lock = threading.Lock()
        self._contexts: Dict[str, ssl.SSLContext] = {}
        self._tmpdir = tempfile.TemporaryDirectory(prefix="tracecap-ca-")

    @property
    def certificate_pem(self) -> bytes:
        return self._cert.public_bytes(serialization.Encoding.PEM)

    def write_certificate(self, path) -> Path:
        path = Path(path)
        path.write_bytes(self.certificate_pem)
        return path

    def _issue_leaf(self, host: str) -> Tuple[bytes, bytes]:
        key = ec.generate_private_key(ec.SECP256R1())
        now = datetime.datetime.now(datetime.timezone.utc)
        cert = (
            x509.CertificateBuilder()
            .subject_name(_name(host))
            .issuer_name(self._cert.subject)
            .public_key(key.public_key())
            .serial_number(x509.random_serial_number())
            .not_valid_before(now - _ONE_DAY)
            .not_valid_after(now + _VALIDITY)
            .add_extension(_san(host), critical=False)
            .add_extension(x509.BasicConstraints(ca=False, path_length=None), critical=True)
            .add_extension(
                x509.ExtendedKeyUsage([ExtendedKeyUsageOID.SERVER_AUTH]), critical=False)
            .sign(self._key, hashes.SHA256())
        )
        return cert.public_bytes(serialization.Encoding.PEM), _key_pem(key)

    def server_context(self, host: str) -> ssl.SSLContext:
        """TLS server context presenting a leaf for ``host``; cached per host."""
        with self._lock:
            ctx = self._contexts.get(host)
            if ctx is not None:
                return ctx
            cert_pem, key_pem = self._issue_leaf(host)
            base = Path(self._tmpdir.name) / host.replace(":", "_")
            cert_path = base.with_suffix(".crt")
            key_path = base.with_suffix(".key")
            cert_path.write_bytes(cert_pem)
            key_path.write_bytes(key_pem)
            ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
            ctx.load_cert_chain(cert_path, key_path)
            self._contexts[host] = ctx
            return ctx

    def close(self):
        self._tmpdir.cleanup()


def self_signed_server_context(host: str) -> Tuple[ssl.SSLContext, bytes]:
    """Standalone self-signed server cert (fixture portal TLS).

    Returns the ready server context and the certificate PEM clients can
    pin to verify against.
    """
    key = ec.generate_private_key(ec.SECP256R1())
    now = datetime.datetime.now(datetime.timezone.utc)
    cert = (
        x509.CertificateBuilder()
        .subject_name(_name(host))
        .issuer_name(_name(host))
        .public_key(key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(now - _ONE_DAY)
        .not_valid_after(now + _VALIDITY)
        .add_extension(_san(host), critical=False)
        .add_extension(x509.BasicConstraints(ca=True, path_length=None), critical=True)
        .sign(key, hashes.SHA256())
    )
    cert_pem = cert.public_bytes(serialization.Encoding.PEM)
    with tempfile.TemporaryDirectory(prefix="tracecap-tls-") as tmp:
        cert_path = Path(tmp) / "server.crt"
        key_path = Path(tmp) / "server.key"
        cert_path.write_bytes(cert_pem)
        key_path.write_bytes(_key_pem(key))
        ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
        ctx.load_cert_chain(cert_path, key_path)
    return ctx, cert_pem


def trust_context(ca_pem: Optional[bytes]) -> ssl.SSLContext:
    """Client context trusting exactly ``ca_pem`` (or nothing checked if None)."""
    ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
    if ca_pem is None:
        ctx.check_hostname = False
        ctx.verify_mode = ssl.CERT_NONE
    else:
        ctx.load_verify_locations(cadata=ca_pem.decode("ascii"))
    return ctx
