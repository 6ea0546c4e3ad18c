/**
 * Vitest global setup: boot a live grammar-forge service (the real CLI
 * `serve` entry point) for the end-to-end contract tests. The base URL is
 * handed to the test workers via provide/inject.
 */

import { spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import type { TestProject } from "vitest/node";

declare module "vitest" {
  export interface ProvidedContext {
    baseUrl: string;
  }
}

async function waitForService(url: string, timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${url}/api/styles`);
      if (response.ok) return;
    } catch (error) {
      lastError = error;
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error(`service did not come up at ${url}: ${String(lastError)}`);
}

export default async function setup(project: TestProject): Promise<() => void> {
  const here = dirname(fileURLToPath(import.meta.url));
  const repoRoot = join(here, "..", "..");
  const { SERVICE_PORT: port } = await import("../vitest.config.js");
  const baseUrl = `http://127.0.0.1:${port}`;
  const stylesDir = mkdtempSync(join(tmpdir(), "gf-styles-"));
  const child = spawn("grammar-forge", ["serve", "--port", String(port)], {
    cwd: repoRoot,
    env: { ...process.env, GRAMMAR_FORGE_STYLES: stylesDir },
    stdio: ["ignore", "inherit", "inherit"],
  });
  await waitForService(baseUrl, 30_000);
  project.provide("baseUrl", baseUrl);
  return () => {
    child.kill("SIGTERM");
    rmSync(stylesDir, { recursive: true, force: true });
  };
}
