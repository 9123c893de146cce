"""Report schemas and the results ledger for bksim."""
