"""Test suite for contact-ms."""
