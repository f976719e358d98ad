/** Entrypoint: parse flags, build the app, listen. */

import { configFromArgs, StartupConfig, USAGE } from "./cli.js";
import { createApp } from "./server.js";

function main(argv: string[]): void {
  let config: StartupConfig;
  try {
    config = configFromArgs(argv);
  } catch (error) {
    process.stderr.write(`uvforge-adapter: ${(error as Error).message}\n${USAGE}`);
    process.exit(2);
  }
  if (config.help) {
    process.stdout.write(USAGE);
    return;
  }
  const app = createApp(config);
  app.listen(config.port, config.host, () => {
    console.log(
      `uvforge-adapter listening on http://${config.host}:${config.port} (${config.mode} mode)`,
    );
  });
}

main(process.argv.slice(2));
