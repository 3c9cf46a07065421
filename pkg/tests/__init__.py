# legalir test suite
