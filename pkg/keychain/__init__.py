from importlib.metadata import PackageNotFoundError, version

PACKAGE_NAME = "keychain-solver"
try:
    PACKAGE_VERSION = version(PACKAGE_NAME)
except PackageNotFoundError:
    # running from a source checkout
    PACKAGE_VERSION = "0.0.0+unknown"
